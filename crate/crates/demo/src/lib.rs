//! Browser bindings for the pruning library.
//!
//! Every operation takes plain strings and numbers and returns a JSON
//! string. The `wasm` module wraps them and turns errors into JavaScript
//! exceptions.

use dep_core::analysis::{growth_curve, CheckpointPolicy, CurvePoint, HeapsFit};
use dep_core::format::{decode_dataset_text, encode_dataset_text};
use dep_core::metrics::{param_breakdown, percent_1dp, ParamTerm};
use dep_core::{
    apply_remap, build_remap, count_params, coverage_ratio, pr_all, pr_emb, scan_dataset, ModelConfig, RemapOrdering,
    TokenId,
};
use serde::Serialize;

pub type DemoResult = Result<String, String>;

fn json<T: Serialize>(value: &T) -> DemoResult {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// A preset name, or a model config as JSON.
fn model_config(source: &str) -> Result<ModelConfig, String> {
    let source = source.trim();
    let cfg = if source.starts_with('{') {
        serde_json::from_str(source).map_err(err)?
    } else {
        ModelConfig::preset(source).ok_or_else(|| format!("unknown preset {source:?}"))?
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

pub fn presets() -> DemoResult {
    json(&ModelConfig::PRESETS)
}

#[derive(Serialize)]
struct Savings {
    config: ModelConfig,
    n_total: u64,
    n_emb: u64,
    poep_pct: f64,
    reduced_vocab: usize,
    pr_emb_pct: f64,
    pr_all_pct: f64,
    n_total_pruned: u64,
    bytes_saved: u64,
    breakdown: Vec<ParamTerm>,
}

/// Parameter savings when the model keeps only `reduced_vocab` embedding rows.
pub fn savings(config: &str, reduced_vocab: usize) -> DemoResult {
    let config = model_config(config)?;
    let params = count_params(&config);
    let emb = pr_emb(config.vocab_size, reduced_vocab).map_err(err)?;
    let removed_rows = (config.vocab_size - reduced_vocab) as u64;
    let removed = removed_rows * config.d_model as u64;
    json(&Savings {
        n_total: params.n_total,
        n_emb: params.n_emb,
        poep_pct: percent_1dp(params.poep),
        reduced_vocab,
        pr_emb_pct: percent_1dp(emb),
        pr_all_pct: percent_1dp(pr_all(emb, &params)),
        n_total_pruned: params.n_total - removed,
        bytes_saved: removed * 4,
        breakdown: param_breakdown(&config),
        config,
    })
}

#[derive(Serialize)]
struct Analysis {
    sequences: usize,
    total_tokens: u64,
    used_tokens: usize,
    coverage: f64,
    curve: Vec<CurvePoint>,
    heaps: Option<HeapsFit>,
}

/// Coverage and distinct-token growth of a text dataset: one sequence per
/// line, whitespace-separated ids.
pub fn analyze(text: &str, vocab_size: usize) -> DemoResult {
    let dataset = decode_dataset_text(text, vocab_size).map_err(err)?;
    let freqs = scan_dataset(&dataset);
    let curve = growth_curve(&dataset, &CheckpointPolicy::PowersOfTwo);
    json(&Analysis {
        sequences: dataset.len(),
        total_tokens: freqs.total_tokens(),
        used_tokens: freqs.used_count(),
        coverage: coverage_ratio(&freqs),
        heaps: curve.fit().ok(),
        curve: curve.points,
    })
}

#[derive(Serialize)]
struct Preview {
    original_vocab: usize,
    reduced_vocab: usize,
    /// `[original, dense]`, in dense order.
    pairs: Vec<[u32; 2]>,
    dataset: String,
}

/// The remap a prune would build and the dataset rewritten onto it.
/// `keep` is a comma- or space-separated id list.
pub fn prune_preview(text: &str, vocab_size: usize, ordering: &str, keep: &str) -> DemoResult {
    let dataset = decode_dataset_text(text, vocab_size).map_err(err)?;
    let ordering: RemapOrdering = ordering.parse().map_err(err)?;
    let keep = keep
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map(TokenId).map_err(|_| format!("bad keep id {s:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    let remap = build_remap(&scan_dataset(&dataset), ordering, &keep).map_err(err)?;
    let remapped = apply_remap(&dataset, &remap).map_err(err)?;
    json(&Preview {
        original_vocab: vocab_size,
        reduced_vocab: remap.len(),
        pairs: remap.pairs().map(|(o, n)| [o.0, n.0]).collect(),
        dataset: encode_dataset_text(&remapped),
    })
}

mod wasm {
    use wasm_bindgen::prelude::*;

    fn throw(r: super::DemoResult) -> Result<String, JsError> {
        r.map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn presets() -> Result<String, JsError> {
        throw(super::presets())
    }

    #[wasm_bindgen]
    pub fn savings(config: &str, reduced_vocab: usize) -> Result<String, JsError> {
        throw(super::savings(config, reduced_vocab))
    }

    #[wasm_bindgen]
    pub fn analyze(text: &str, vocab_size: usize) -> Result<String, JsError> {
        throw(super::analyze(text, vocab_size))
    }

    #[wasm_bindgen(js_name = prunePreview)]
    pub fn prune_preview(text: &str, vocab_size: usize, ordering: &str, keep: &str) -> Result<String, JsError> {
        throw(super::prune_preview(text, vocab_size, ordering, keep))
    }
}
