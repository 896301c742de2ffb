//! Parameter accounting for BERT-style encoders and the savings obtained by
//! pruning the token embedding matrix.
//!
//! Only the token embedding matrix changes size when the vocabulary is
//! reduced, so the fraction of *all* parameters removed is the fraction of
//! embedding rows removed scaled by the share of parameters that live in the
//! embedding matrix:
//!
//! ```text
//! pr_emb = 1 - |V'| / |V|
//! poep   = n_emb / n_total
//! pr_all = 1 - n_total' / n_total = pr_emb * poep
//! ```

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::vocab::{FrequencyTable, RemapTable};

fn default_max_positions() -> usize {
    512
}

fn default_type_vocab() -> usize {
    2
}

fn default_pooler() -> bool {
    true
}

/// Shape of a BERT-family encoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default)]
    pub name: String,
    pub vocab_size: usize,
    pub d_model: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Feed-forward inner size; `4 * d_model` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ffn_dim: Option<usize>,
    #[serde(default = "default_max_positions")]
    pub max_positions: usize,
    /// Segment (token type) embeddings; 0 for models without them.
    #[serde(default = "default_type_vocab")]
    pub type_vocab: usize,
    /// A `d_model × d_model` dense layer with bias on top of the encoder
    /// (the BERT pooler, or the first layer of a classification head).
    #[serde(default = "default_pooler")]
    pub has_pooler: bool,
}

impl ModelConfig {
    /// BERT-style config with 512 positions, 2 segment types and a pooler.
    pub fn bert(name: &str, vocab_size: usize, num_layers: usize, num_heads: usize, d_model: usize) -> Self {
        Self {
            name: name.to_string(),
            vocab_size,
            d_model,
            num_layers,
            num_heads,
            ffn_dim: None,
            max_positions: 512,
            type_vocab: 2,
            has_pooler: true,
        }
    }

    /// RoBERTa-style: 514 positions (two reserved for the padding offset) and
    /// a single segment type.
    pub fn roberta(name: &str, vocab_size: usize, num_layers: usize) -> Self {
        Self {
            max_positions: 514,
            type_vocab: 1,
            ..Self::bert(name, vocab_size, num_layers, 12, 768)
        }
    }

    pub fn ffn(&self) -> usize {
        self.ffn_dim.unwrap_or(4 * self.d_model)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.vocab_size == 0 {
            return bad("vocab_size must be positive");
        }
        if self.d_model == 0 {
            return bad("d_model must be positive");
        }
        if self.num_heads == 0 {
            return bad("num_heads must be positive");
        }
        if !self.d_model.is_multiple_of(self.num_heads) {
            return Err(Error::InvalidConfig(format!(
                "d_model {} is not divisible by num_heads {}",
                self.d_model, self.num_heads
            )));
        }
        if self.ffn() == 0 {
            return bad("ffn_dim must be positive");
        }
        Ok(())
    }

    /// Named presets for the models used in the bundled fixtures.
    pub fn preset(name: &str) -> Option<Self> {
        const BERT_VOCAB: usize = 30_522;
        const ROBERTA_VOCAB: usize = 50_265;
        let cfg = match name {
            "bert-tiny" => Self::bert(name, BERT_VOCAB, 2, 2, 128),
            "bert-mini" => Self::bert(name, BERT_VOCAB, 4, 4, 256),
            "bert-medium" => Self::bert(name, BERT_VOCAB, 4, 8, 512),
            "bert-small" => Self::bert(name, BERT_VOCAB, 8, 8, 512),
            "bert-base" => Self::bert(name, BERT_VOCAB, 12, 12, 768),
            "bert-large" => Self::bert(name, BERT_VOCAB, 24, 16, 1024),
            "distilbert" => Self {
                type_vocab: 0,
                ..Self::bert(name, BERT_VOCAB, 6, 12, 768)
            },
            "mbert" => Self::bert(name, 105_879, 12, 12, 768),
            "mbert-cased" => Self::bert(name, 119_547, 12, 12, 768),
            "roberta" => Self::roberta(name, ROBERTA_VOCAB, 12),
            "distilroberta" => Self::roberta(name, ROBERTA_VOCAB, 6),
            "xlm-roberta" => Self::roberta(name, 250_002, 12),
            _ => return None,
        };
        Some(cfg)
    }

    pub const PRESETS: &'static [&'static str] = &[
        "bert-tiny",
        "bert-mini",
        "bert-medium",
        "bert-small",
        "bert-base",
        "bert-large",
        "distilbert",
        "distilroberta",
        "mbert",
        "mbert-cased",
        "roberta",
        "xlm-roberta",
    ];
}

/// One named group of tensors and its parameter count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParamTerm {
    pub name: &'static str,
    pub params: u64,
}

/// Parameter count of every tensor group, in forward order.
///
/// Per layer: Q, K, V and attention-output projections (weight and bias),
/// attention layer norm, FFN up and down projections (weight and bias), and
/// output layer norm.
pub fn param_breakdown(config: &ModelConfig) -> Vec<ParamTerm> {
    let d = config.d_model as u64;
    let f = config.ffn() as u64;
    let l = config.num_layers as u64;
    let layer_norm = 2 * d;
    let dense = |i: u64, o: u64| i * o + o;
    let mut terms = vec![
        ParamTerm {
            name: "embeddings.word",
            params: config.vocab_size as u64 * d,
        },
        ParamTerm {
            name: "embeddings.position",
            params: config.max_positions as u64 * d,
        },
        ParamTerm {
            name: "embeddings.token_type",
            params: config.type_vocab as u64 * d,
        },
        ParamTerm {
            name: "embeddings.layer_norm",
            params: layer_norm,
        },
        ParamTerm {
            name: "layers.attention.qkv",
            params: l * 3 * dense(d, d),
        },
        ParamTerm {
            name: "layers.attention.output",
            params: l * dense(d, d),
        },
        ParamTerm {
            name: "layers.attention.layer_norm",
            params: l * layer_norm,
        },
        ParamTerm {
            name: "layers.ffn.intermediate",
            params: l * dense(d, f),
        },
        ParamTerm {
            name: "layers.ffn.output",
            params: l * dense(f, d),
        },
        ParamTerm {
            name: "layers.output.layer_norm",
            params: l * layer_norm,
        },
    ];
    if config.has_pooler {
        terms.push(ParamTerm {
            name: "pooler",
            params: dense(d, d),
        });
    }
    terms
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCount {
    pub n_total: u64,
    pub n_emb: u64,
    /// Share of all parameters held by the token embedding matrix.
    pub poep: f64,
}

pub fn count_params(config: &ModelConfig) -> ParamCount {
    let n_total: u64 = param_breakdown(config).iter().map(|t| t.params).sum();
    let n_emb = config.vocab_size as u64 * config.d_model as u64;
    ParamCount {
        n_total,
        n_emb,
        poep: if n_total == 0 {
            0.0
        } else {
            n_emb as f64 / n_total as f64
        },
    }
}

/// Fraction of embedding rows removed.
pub fn pr_emb(original_vocab: usize, reduced_vocab: usize) -> Result<f64> {
    if original_vocab == 0 || reduced_vocab > original_vocab {
        return Err(Error::InvalidCounts {
            original: original_vocab,
            reduced: reduced_vocab,
        });
    }
    Ok(1.0 - reduced_vocab as f64 / original_vocab as f64)
}

/// Fraction of all parameters removed when only embedding rows go.
pub fn pr_all(pr_emb_value: f64, params: &ParamCount) -> f64 {
    pr_emb_value * params.poep
}

/// Rounds a fraction to a percentage with one decimal, as printed in tables.
pub fn percent_1dp(fraction: f64) -> f64 {
    (fraction * 1000.0).round() / 10.0
}

/// Percentages rounded for display; the full-precision fractions live next
/// to them in [`PruneReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Presentation {
    pub pr_emb_pct: f64,
    pub pr_all_pct: f64,
    pub poep_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub config_name: String,
    pub timestamp: String,
    pub original_vocab: usize,
    pub reduced_vocab: usize,
    pub d_model: usize,
    pub n_total: u64,
    pub n_emb: u64,
    pub n_total_pruned: u64,
    pub n_emb_pruned: u64,
    pub poep: f64,
    pub pr_emb: f64,
    pub pr_all: f64,
    pub bytes_saved: u64,
    pub presentation: Presentation,
}

impl PruneReport {
    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Optional evidence checked against the remap before a report is built.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReportInputs<'a> {
    pub freqs: Option<&'a FrequencyTable>,
    pub matrix_before: Option<&'a EmbeddingMatrix>,
    pub matrix_after: Option<&'a EmbeddingMatrix>,
}

fn inconsistent(left: &'static str, right: &'static str, detail: String) -> Error {
    Error::InconsistentInputs { left, right, detail }
}

pub fn build_report(
    remap: &RemapTable,
    config: &ModelConfig,
    inputs: ReportInputs<'_>,
    timestamp: &str,
) -> Result<PruneReport> {
    config.validate()?;
    let original = remap.original_vocab_size();
    let reduced = remap.len();
    if config.vocab_size != original {
        return Err(inconsistent(
            "config",
            "remap",
            format!("config vocab_size {} but remap covers {original}", config.vocab_size),
        ));
    }
    if let Some(freqs) = inputs.freqs {
        if freqs.vocab_size() != original {
            return Err(inconsistent(
                "freqs",
                "remap",
                format!(
                    "frequency table over {} ids but remap covers {original}",
                    freqs.vocab_size()
                ),
            ));
        }
        if let Some(t) = freqs.used().find(|&t| remap.forward(t).is_none()) {
            return Err(inconsistent(
                "freqs",
                "remap",
                format!("used token {t} is not retained"),
            ));
        }
    }
    if let Some(m) = inputs.matrix_before {
        if m.rows() != original || m.dim() != config.d_model {
            return Err(inconsistent(
                "matrix_before",
                "config",
                format!(
                    "matrix is {}x{}, expected {original}x{}",
                    m.rows(),
                    m.dim(),
                    config.d_model
                ),
            ));
        }
    }
    if let Some(m) = inputs.matrix_after {
        if m.rows() != reduced || m.dim() != config.d_model {
            return Err(inconsistent(
                "matrix_after",
                "remap",
                format!(
                    "matrix is {}x{}, expected {reduced}x{}",
                    m.rows(),
                    m.dim(),
                    config.d_model
                ),
            ));
        }
    }

    let params = count_params(config);
    let pr_emb = pr_emb(original, reduced)?;
    let pr_all = pr_all(pr_emb, &params);
    let removed_rows = (original - reduced) as u64;
    let d = config.d_model as u64;
    let removed_params = removed_rows * d;
    Ok(PruneReport {
        config_name: config.name.clone(),
        timestamp: timestamp.to_string(),
        original_vocab: original,
        reduced_vocab: reduced,
        d_model: config.d_model,
        n_total: params.n_total,
        n_emb: params.n_emb,
        n_total_pruned: params.n_total - removed_params,
        n_emb_pruned: params.n_emb - removed_params,
        poep: params.poep,
        pr_emb,
        pr_all,
        bytes_saved: removed_params * std::mem::size_of::<f32>() as u64,
        presentation: Presentation {
            pr_emb_pct: percent_1dp(pr_emb),
            pr_all_pct: percent_1dp(pr_all),
            poep_pct: percent_1dp(params.poep),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{build_remap, RemapOrdering, TokenId};
    use proptest::prelude::*;

    fn millions(n: u64) -> f64 {
        n as f64 / 1e6
    }

    #[test]
    fn bert_base_breakdown() {
        let c = count_params(&ModelConfig::preset("bert-base").unwrap());
        assert_eq!(c.n_total, 109_482_240);
        assert_eq!(c.n_emb, 23_440_896);
        assert_eq!(percent_1dp(c.poep), 21.4);
    }

    #[test]
    fn bert_tiny() {
        let c = count_params(&ModelConfig::preset("bert-tiny").unwrap());
        assert!((millions(c.n_total) - 4.4).abs() < 0.05);
        assert!((millions(c.n_emb) - 3.9).abs() < 0.05);
        assert_eq!(percent_1dp(c.poep), 89.1);
    }

    #[test]
    fn minimal_config() {
        let cfg = ModelConfig {
            name: String::new(),
            vocab_size: 1,
            d_model: 1,
            num_layers: 0,
            num_heads: 1,
            ffn_dim: None,
            max_positions: 1,
            type_vocab: 1,
            has_pooler: false,
        };
        let c = count_params(&cfg);
        assert_eq!(c.n_emb, 1);
        // word + position + type + layer-norm gain and bias
        assert_eq!(c.n_total, 5);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ModelConfig::preset("bert-base").unwrap();
        assert!(cfg.validate().is_ok());
        cfg.num_heads = 7;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.num_heads = 0;
        assert!(cfg.validate().is_err());
        assert!(ModelConfig::PRESETS
            .iter()
            .all(|p| ModelConfig::preset(p).unwrap().validate().is_ok()));
        assert!(ModelConfig::preset("gpt-5").is_none());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ModelConfig =
            serde_json::from_str(r#"{"vocab_size": 30522, "d_model": 768, "num_layers": 12, "num_heads": 12}"#)
                .unwrap();
        assert_eq!(count_params(&cfg).n_total, 109_482_240);
    }

    #[test]
    fn pr_emb_values() {
        assert_eq!(pr_emb(100, 100).unwrap(), 0.0);
        assert_eq!(percent_1dp(pr_emb(30_522, 1_736).unwrap()), 94.3);
        assert!(matches!(pr_emb(0, 0), Err(Error::InvalidCounts { .. })));
        assert!(matches!(pr_emb(5, 6), Err(Error::InvalidCounts { .. })));
    }

    #[test]
    fn pr_all_values() {
        let p = ParamCount {
            n_total: 1000,
            n_emb: 214,
            poep: 0.214,
        };
        assert_eq!(percent_1dp(pr_all(0.801, &p)), 17.1);
        let x = ParamCount {
            n_total: 1000,
            n_emb: 691,
            poep: 0.691,
        };
        assert_eq!(percent_1dp(pr_all(0.993, &x)), 68.6);
        assert_eq!(pr_all(0.0, &x), 0.0);
    }

    fn remap_keeping(vocab: usize, reduced: usize) -> RemapTable {
        let mut counts = vec![0u64; vocab];
        counts[..reduced].iter_mut().for_each(|c| *c = 1);
        build_remap(&FrequencyTable::from_counts(counts), RemapOrdering::AscendingId, &[]).unwrap()
    }

    #[test]
    fn report_identity() {
        let cfg = ModelConfig::preset("bert-tiny").unwrap();
        let r = build_report(
            &RemapTable::identity(cfg.vocab_size),
            &cfg,
            ReportInputs::default(),
            "t",
        )
        .unwrap();
        assert_eq!((r.pr_emb, r.pr_all, r.bytes_saved), (0.0, 0.0, 0));
        assert_eq!(r.n_total_pruned, r.n_total);
    }

    #[test]
    fn report_bert_base_wnli_scale() {
        let cfg = ModelConfig::preset("bert-base").unwrap();
        let r = build_report(&remap_keeping(30_522, 1_736), &cfg, ReportInputs::default(), "t").unwrap();
        assert_eq!(r.bytes_saved, 28_786 * 768 * 4);
        assert_eq!(r.presentation.pr_emb_pct, 94.3);
        assert_eq!(r.n_emb_pruned, 1_736 * 768);
        // the two routes to pr_all agree
        let via_counts = 1.0 - r.n_total_pruned as f64 / r.n_total as f64;
        assert!((via_counts - r.pr_all).abs() < 1e-12);
        assert_eq!(PruneReport::from_json(&r.to_json_pretty().unwrap()).unwrap(), r);
    }

    #[test]
    fn report_checks_inputs() {
        let cfg = ModelConfig::bert("toy", 8, 1, 1, 2);
        let remap = remap_keeping(8, 3);
        let err = build_report(&remap_keeping(9, 3), &cfg, ReportInputs::default(), "").unwrap_err();
        assert!(matches!(err, Error::InconsistentInputs { left: "config", .. }));

        let freqs = FrequencyTable::from_counts(vec![0, 0, 0, 0, 1, 0, 0, 0]);
        let err = build_report(
            &remap,
            &cfg,
            ReportInputs {
                freqs: Some(&freqs),
                ..Default::default()
            },
            "",
        )
        .unwrap_err();
        assert!(matches!(err, Error::InconsistentInputs { left: "freqs", .. }));

        let before = EmbeddingMatrix::zeros(8, 3).unwrap();
        let err = build_report(
            &remap,
            &cfg,
            ReportInputs {
                matrix_before: Some(&before),
                ..Default::default()
            },
            "",
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InconsistentInputs {
                left: "matrix_before",
                ..
            }
        ));

        let after = EmbeddingMatrix::zeros(4, 2).unwrap();
        let err = build_report(
            &remap,
            &cfg,
            ReportInputs {
                matrix_after: Some(&after),
                ..Default::default()
            },
            "",
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InconsistentInputs {
                left: "matrix_after",
                ..
            }
        ));

        let before = EmbeddingMatrix::zeros(8, 2).unwrap();
        let after = EmbeddingMatrix::zeros(3, 2).unwrap();
        let freqs = FrequencyTable::from_counts(vec![1, 0, 2, 0, 0, 0, 0, 0]);
        let ok = ReportInputs {
            freqs: Some(&freqs),
            matrix_before: Some(&before),
            matrix_after: Some(&after),
        };
        assert!(build_report(&remap, &cfg, ok, "").is_ok());
        assert_eq!(remap.forward(TokenId(2)), Some(TokenId(2)));
    }

    proptest! {
        #[test]
        fn pr_emb_matches_exact_fraction(original in 1usize..1_000_000, frac in 0.0f64..=1.0) {
            let reduced = ((original as f64) * frac) as usize;
            let v = pr_emb(original, reduced).unwrap();
            // exact rational: (original - reduced) / original, compared by cross-multiplication
            let removed = (original - reduced) as f64;
            prop_assert!((v * original as f64 - removed).abs() <= 1e-9 * original as f64);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn pr_all_bounded_and_monotone(preset in 0usize..ModelConfig::PRESETS.len(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let cfg = ModelConfig::preset(ModelConfig::PRESETS[preset]).unwrap();
            let p = count_params(&cfg);
            let v = cfg.vocab_size;
            let (lo, hi) = {
                let x = (a * v as f64) as usize;
                let y = (b * v as f64) as usize;
                (x.min(y), x.max(y))
            };
            let all_lo = pr_all(pr_emb(v, lo).unwrap(), &p);
            let all_hi = pr_all(pr_emb(v, hi).unwrap(), &p);
            prop_assert!(all_hi <= all_lo);
            prop_assert!(all_lo <= pr_emb(v, lo).unwrap());
            prop_assert!(p.poep > 0.0 && p.poep < 1.0);
        }
    }
}
