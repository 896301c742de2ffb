//! Dataset-driven pruning of token embedding matrices.
//!
//! A fine-tuning or inference dataset usually touches only a fraction of a
//! subword vocabulary. This crate finds that fraction, gathers the matching
//! embedding rows into a compact matrix, rewrites the dataset onto dense ids,
//! and scatters learned rows back into the full matrix afterwards so the
//! model keeps its original shape.
//!
//! ```
//! use dep_core::{build_remap, prune_embeddings, restore_embeddings, scan_dataset};
//! use dep_core::{EmbeddingMatrix, RemapOrdering, TokenizedDataset};
//!
//! let data = TokenizedDataset::from_ids(vec![vec![1, 3, 1]], 4).unwrap();
//! let remap = build_remap(&scan_dataset(&data), RemapOrdering::AscendingId, &[]).unwrap();
//! let full = EmbeddingMatrix::new(4, 2, (0..8).map(|v| v as f32).collect()).unwrap();
//! let reduced = prune_embeddings(&full, &remap).unwrap();
//! assert_eq!(reduced.data(), &[2.0, 3.0, 6.0, 7.0]);
//! assert!(restore_embeddings(&full, &reduced, &remap).unwrap().bit_eq(&full));
//! ```

pub mod analysis;
pub mod embedding;
pub mod error;
pub mod format;
pub mod metrics;
pub mod vocab;

pub use analysis::{
    coverage_ratio, find_unused_tokens, fit_heaps, growth_curve, CheckpointPolicy, CurvePoint, GrowthCurve, HeapsFit,
};
pub use embedding::{prune_embeddings, restore_embeddings, validate_matrix, EmbeddingMatrix, ValidationSummary};
pub use error::{Error, Result};
pub use metrics::{build_report, count_params, pr_all, pr_emb, ModelConfig, ParamCount, PruneReport, ReportInputs};
pub use vocab::{
    apply_remap, build_remap, invert_remap, merge_frequency_tables, scan_dataset, scan_partitioned, FrequencyTable,
    RemapOrdering, RemapTable, TokenId, TokenizedDataset,
};
