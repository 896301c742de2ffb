//! Fixture loading, random instance generators and naive reference
//! implementations shared by the integration tests. The references are
//! deliberately written without touching the library code paths they check.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use dep_core::{EmbeddingMatrix, RemapOrdering, TokenId, TokenizedDataset};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

pub fn fixture(name: &str) -> Vec<Vec<String>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|l| l.split(',').map(|c| c.trim().to_string()).collect())
        .collect()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_dataset(rng: &mut StdRng, vocab_size: usize, max_seqs: usize, max_len: usize) -> TokenizedDataset {
    let n = rng.random_range(0..=max_seqs);
    // skewed draws leave part of the vocabulary unused
    let hot = rng.random_range(1..=vocab_size);
    let seqs = (0..n)
        .map(|_| {
            let len = rng.random_range(0..=max_len);
            (0..len)
                .map(|_| {
                    if rng.random_bool(0.8) {
                        rng.random_range(0..hot as u32)
                    } else {
                        rng.random_range(0..vocab_size as u32)
                    }
                })
                .collect()
        })
        .collect();
    TokenizedDataset::from_ids(seqs, vocab_size).unwrap()
}

pub fn random_matrix(rng: &mut StdRng, rows: usize, dim: usize) -> EmbeddingMatrix {
    let data = (0..rows * dim)
        .map(|_| {
            // arbitrary bit patterns, NaN payloads and infinities included
            if rng.random_bool(0.1) {
                f32::from_bits(rng.random())
            } else {
                rng.random_range(-1.0f32..1.0)
            }
        })
        .collect();
    EmbeddingMatrix::new(rows, dim, data).unwrap()
}

pub fn random_ordering(rng: &mut StdRng) -> RemapOrdering {
    if rng.random_bool(0.5) {
        RemapOrdering::AscendingId
    } else {
        RemapOrdering::FrequencyDescending
    }
}

pub fn random_keep(rng: &mut StdRng, vocab_size: usize) -> Vec<TokenId> {
    let k = rng.random_range(0..4usize);
    (0..k)
        .map(|_| TokenId(rng.random_range(0..vocab_size as u32)))
        .collect()
}

/// Counts with a map, one token at a time.
pub fn naive_counts(seqs: &[Vec<u32>], vocab_size: usize) -> Vec<u64> {
    let mut map: BTreeMap<u32, u64> = BTreeMap::new();
    for s in seqs {
        for &t in s {
            *map.entry(t).or_insert(0) += 1;
        }
    }
    (0..vocab_size as u32)
        .map(|i| map.get(&i).copied().unwrap_or(0))
        .collect()
}

/// Row selection by index arithmetic on the flat buffer.
pub fn naive_gather(data: &[f32], dim: usize, rows: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    for &r in rows {
        for c in 0..dim {
            out.push(data[r as usize * dim + c].to_bits());
        }
    }
    out
}

/// Writes `learned` row `j` over row `targets[j]` of a copy of `base`.
pub fn naive_scatter(base: &[f32], learned: &[f32], dim: usize, targets: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = base.iter().map(|v| v.to_bits()).collect();
    for (j, &t) in targets.iter().enumerate() {
        for c in 0..dim {
            out[t as usize * dim + c] = learned[j * dim + c].to_bits();
        }
    }
    out
}

#[allow(clippy::needless_range_loop)]
pub fn naive_unused(counts: &[u64]) -> Vec<u32> {
    let mut out = Vec::new();
    for i in 0..counts.len() {
        if counts[i] == 0 {
            out.push(i as u32);
        }
    }
    out
}

pub fn bits(m: &EmbeddingMatrix) -> Vec<u32> {
    m.data().iter().map(|v| v.to_bits()).collect()
}

pub fn raw(d: &TokenizedDataset) -> Vec<Vec<u32>> {
    d.sequences().iter().map(|s| s.iter().map(|t| t.0).collect()).collect()
}
