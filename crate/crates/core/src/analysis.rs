//! Vocabulary usage statistics: distinct-token growth curves, power-law
//! (Heaps) fits, coverage and never-used tokens.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{FrequencyTable, TokenId, TokenizedDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Length of the stream prefix.
    pub tokens: u64,
    /// Distinct ids within that prefix.
    pub unique: u64,
}

impl From<(u64, u64)> for CurvePoint {
    fn from((tokens, unique): (u64, u64)) -> Self {
        CurvePoint { tokens, unique }
    }
}

/// Where growth-curve samples are taken. The final token count is always
/// sampled as well.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum CheckpointPolicy {
    /// 1, 2, 4, 8, ...
    #[default]
    PowersOfTwo,
    /// Every prefix length; only sensible for small corpora.
    All,
    /// Every `n` tokens.
    Every(u64),
    Explicit(Vec<u64>),
}

impl CheckpointPolicy {
    /// Sorted, deduplicated checkpoints within `1..=total`, ending at `total`.
    pub fn checkpoints(&self, total: u64) -> Vec<u64> {
        if total == 0 {
            return Vec::new();
        }
        let mut points: Vec<u64> = match self {
            CheckpointPolicy::PowersOfTwo => std::iter::successors(Some(1u64), |&p| p.checked_mul(2))
                .take_while(|&p| p <= total)
                .collect(),
            CheckpointPolicy::All => (1..=total).collect(),
            CheckpointPolicy::Every(n) => {
                let n = (*n).max(1);
                (1..=total / n).map(|k| k * n).collect()
            }
            CheckpointPolicy::Explicit(v) => v.iter().copied().filter(|&c| c >= 1 && c <= total).collect(),
        };
        points.push(total);
        points.sort_unstable();
        points.dedup();
        points
    }
}

impl FromStr for CheckpointPolicy {
    type Err = Error;

    /// Accepts `pow2`, `all`, `every:N` or a comma-separated list.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid checkpoint policy {s:?}"));
        match s {
            "pow2" | "powers-of-two" => Ok(CheckpointPolicy::PowersOfTwo),
            "all" => Ok(CheckpointPolicy::All),
            _ => {
                if let Some(n) = s.strip_prefix("every:") {
                    let n: u64 = n.parse().map_err(|_| bad())?;
                    if n == 0 {
                        return Err(bad());
                    }
                    Ok(CheckpointPolicy::Every(n))
                } else {
                    s.split(',')
                        .map(|p| p.trim().parse::<u64>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>>>()
                        .map(CheckpointPolicy::Explicit)
                }
            }
        }
    }
}

/// Number of distinct tokens seen against number of tokens read.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GrowthCurve {
    pub points: Vec<CurvePoint>,
    pub vocab_size: usize,
}

impl GrowthCurve {
    pub fn final_point(&self) -> Option<CurvePoint> {
        self.points.last().copied()
    }

    /// CSV with header `tokens,unique`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tokens,unique\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{}", p.tokens, p.unique);
        }
        out
    }

    pub fn fit(&self) -> Result<HeapsFit> {
        fit_heaps(&self.points)
    }
}

/// Prefix-distinct counts over the dataset's token stream. Sequential by
/// nature: the answer depends on stream order.
pub fn growth_curve(dataset: &TokenizedDataset, policy: &CheckpointPolicy) -> GrowthCurve {
    growth_curve_of_stream(dataset.tokens(), dataset.total_tokens(), dataset.vocab_size(), policy)
        .expect("validated dataset contains an out-of-range token")
}

/// Same as [`growth_curve`] for a raw token stream of known length.
pub fn growth_curve_of_stream(
    stream: impl IntoIterator<Item = TokenId>,
    total: u64,
    vocab_size: usize,
    policy: &CheckpointPolicy,
) -> Result<GrowthCurve> {
    let checkpoints = policy.checkpoints(total);
    let mut seen = vec![false; vocab_size];
    let mut unique = 0u64;
    let mut next = checkpoints.iter().copied().peekable();
    let mut points = Vec::with_capacity(checkpoints.len());
    for (n, tok) in (1u64..).zip(stream) {
        let slot = seen.get_mut(tok.index()).ok_or(Error::OutOfRangeToken {
            sequence: 0,
            position: (n - 1) as usize,
            id: tok.0,
            vocab_size,
        })?;
        if !*slot {
            *slot = true;
            unique += 1;
        }
        if next.peek() == Some(&n) {
            next.next();
            points.push(CurvePoint { tokens: n, unique });
        }
    }
    Ok(GrowthCurve { points, vocab_size })
}

/// `unique ≈ k · tokens^beta`, fitted by least squares in log-log space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeapsFit {
    pub k: f64,
    pub beta: f64,
    /// Root-mean-square residual of `ln unique`.
    pub rmse_log: f64,
}

impl HeapsFit {
    pub fn predict(&self, tokens: f64) -> f64 {
        self.k * tokens.powf(self.beta)
    }
}

/// Ordinary least squares of `ln unique` on `ln tokens`. Points with a zero
/// coordinate carry no information in log space and are skipped.
pub fn fit_heaps(points: &[CurvePoint]) -> Result<HeapsFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.tokens >= 1 && p.unique >= 1)
        .map(|p| ((p.tokens as f64).ln(), (p.unique as f64).ln()))
        .collect();
    if logs.len() < 2 {
        return Err(Error::InsufficientPoints { usable: logs.len() });
    }
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let beta = sxy / sxx;
    let intercept = mean_y - beta * mean_x;
    let sse: f64 = logs.iter().map(|p| (p.1 - (intercept + beta * p.0)).powi(2)).sum();
    Ok(HeapsFit {
        k: intercept.exp(),
        beta,
        rmse_log: (sse / n).sqrt(),
    })
}

/// Fraction of the vocabulary that occurs at least once.
pub fn coverage_ratio(freqs: &FrequencyTable) -> f64 {
    if freqs.vocab_size() == 0 {
        return 0.0;
    }
    freqs.used_count() as f64 / freqs.vocab_size() as f64
}

/// Ids that never occur, ascending.
pub fn find_unused_tokens(freqs: &FrequencyTable) -> Vec<TokenId> {
    freqs
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(i, _)| TokenId(i as u32))
        .collect()
}
