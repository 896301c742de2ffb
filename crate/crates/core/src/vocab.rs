//! Token datasets, per-token frequencies and the dense remap between the used
//! vocabulary and `0..|used|`.

use std::fmt;
use std::str::FromStr;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a token in some vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
#[repr(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for TokenId {
    fn from(v: u32) -> Self {
        TokenId(v)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_sequences(sequences: &[Vec<TokenId>], vocab_size: usize, offset: usize) -> Result<()> {
    for (s, seq) in sequences.iter().enumerate() {
        for (p, &tok) in seq.iter().enumerate() {
            if tok.index() >= vocab_size {
                return Err(Error::OutOfRangeToken {
                    sequence: offset + s,
                    position: p,
                    id: tok.0,
                    vocab_size,
                });
            }
        }
    }
    Ok(())
}

/// Ragged sequences of token ids, every id below `vocab_size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedDataset {
    sequences: Vec<Vec<TokenId>>,
    vocab_size: usize,
}

impl TokenizedDataset {
    pub fn new(sequences: Vec<Vec<TokenId>>, vocab_size: usize) -> Result<Self> {
        check_sequences(&sequences, vocab_size, 0)?;
        Ok(Self { sequences, vocab_size })
    }

    pub fn from_ids(sequences: Vec<Vec<u32>>, vocab_size: usize) -> Result<Self> {
        let sequences = sequences
            .into_iter()
            .map(|s| s.into_iter().map(TokenId).collect())
            .collect();
        Self::new(sequences, vocab_size)
    }

    pub fn empty(vocab_size: usize) -> Self {
        Self {
            sequences: Vec::new(),
            vocab_size,
        }
    }

    pub fn sequences(&self) -> &[Vec<TokenId>] {
        &self.sequences
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.sequences.iter().map(|s| s.len() as u64).sum()
    }

    /// All tokens in canonical stream order: sequence order, then position.
    pub fn tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.sequences.iter().flat_map(|s| s.iter().copied())
    }

    pub fn into_sequences(self) -> Vec<Vec<TokenId>> {
        self.sequences
    }
}

/// Occurrence count of every token of a vocabulary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FrequencyTable {
    vocab_size: usize,
    counts: Vec<u64>,
    total_tokens: u64,
}

impl FrequencyTable {
    pub fn zeros(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            counts: vec![0; vocab_size],
            total_tokens: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total_tokens = counts.iter().sum();
        Self {
            vocab_size: counts.len(),
            counts,
            total_tokens,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts.get(id.index()).copied().unwrap_or(0)
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// The used set, ascending.
    pub fn used(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| TokenId(i as u32))
    }

    pub fn used_count(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    fn add_sequences(&mut self, sequences: &[Vec<TokenId>], offset: usize) -> Result<()> {
        check_sequences(sequences, self.vocab_size, offset)?;
        for seq in sequences {
            for &tok in seq {
                self.counts[tok.index()] += 1;
            }
            self.total_tokens += seq.len() as u64;
        }
        Ok(())
    }
}

/// Counts token occurrences in a slice of sequences.
///
/// `offset` is the index of the first sequence within the full dataset and is
/// only used to report error positions.
pub fn scan_sequences(sequences: &[Vec<TokenId>], vocab_size: usize, offset: usize) -> Result<FrequencyTable> {
    let mut table = FrequencyTable::zeros(vocab_size);
    table.add_sequences(sequences, offset)?;
    Ok(table)
}

pub fn scan_dataset(dataset: &TokenizedDataset) -> FrequencyTable {
    // Ids were range-checked when the dataset was built.
    scan_sequences(&dataset.sequences, dataset.vocab_size, 0).expect("validated dataset contains an out-of-range token")
}

/// Elementwise sum of tables over the same vocabulary.
pub fn merge_frequency_tables(parts: &[FrequencyTable]) -> Result<FrequencyTable> {
    let first = parts.first().ok_or(Error::EmptyMerge)?;
    let mut merged = FrequencyTable::zeros(first.vocab_size);
    for part in parts {
        if part.vocab_size != merged.vocab_size {
            return Err(Error::VocabSizeMismatch {
                expected: merged.vocab_size,
                found: part.vocab_size,
            });
        }
        for (acc, &c) in merged.counts.iter_mut().zip(&part.counts) {
            *acc += c;
        }
        merged.total_tokens += part.total_tokens;
    }
    Ok(merged)
}

/// Splits `len` items into `parts` contiguous ranges of near-equal size.
pub fn partition_ranges(len: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.max(1);
    let base = len / parts;
    let extra = len % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let end = start + base + usize::from(i < extra);
            let r = start..end;
            start = end;
            r
        })
        .collect()
}

/// Scans `partitions` contiguous slices of the dataset on separate threads
/// and merges the partial tables. The result does not depend on
/// `partitions`.
pub fn scan_partitioned(dataset: &TokenizedDataset, partitions: usize) -> FrequencyTable {
    if partitions <= 1 || dataset.len() < 2 {
        return scan_dataset(dataset);
    }
    let ranges = partition_ranges(dataset.len(), partitions);
    let parts: Vec<FrequencyTable> = thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| {
                let slice = &dataset.sequences[r.clone()];
                let vocab_size = dataset.vocab_size;
                scope.spawn(move || scan_sequences(slice, vocab_size, r.start))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .expect("scan worker panicked")
                    .expect("validated dataset contains an out-of-range token")
            })
            .collect()
    });
    merge_frequency_tables(&parts).expect("partitions share one vocabulary")
}

/// How dense ids are assigned to the used vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemapOrdering {
    /// Dense ids follow increasing original id.
    #[default]
    AscendingId,
    /// Most frequent token first; ties go to the smaller original id.
    FrequencyDescending,
}

impl RemapOrdering {
    pub fn as_str(self) -> &'static str {
        match self {
            RemapOrdering::AscendingId => "ascending_id",
            RemapOrdering::FrequencyDescending => "frequency_descending",
        }
    }
}

impl fmt::Display for RemapOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RemapOrdering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "ascending_id" | "ascending" | "id" => Ok(RemapOrdering::AscendingId),
            "frequency_descending" | "frequency" | "freq" => Ok(RemapOrdering::FrequencyDescending),
            _ => Err(Error::Parse(format!("unknown ordering {s:?}"))),
        }
    }
}

/// Bijection between the retained original ids and `0..len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemapTable {
    original_vocab_size: usize,
    ordering: RemapOrdering,
    keep_tokens: Vec<TokenId>,
    forward: Vec<Option<TokenId>>,
    inverse: Vec<TokenId>,
}

impl RemapTable {
    /// Rebuilds a table from its inverse array (`inverse[new] = original`),
    /// checking that it describes a bijection into the original vocabulary.
    pub fn from_inverse(
        original_vocab_size: usize,
        ordering: RemapOrdering,
        keep_tokens: Vec<TokenId>,
        inverse: Vec<TokenId>,
    ) -> Result<Self> {
        let mut forward = vec![None; original_vocab_size];
        for (new, &orig) in inverse.iter().enumerate() {
            let slot = forward.get_mut(orig.index()).ok_or_else(|| {
                Error::RemapInconsistent(format!(
                    "original id {orig} is outside a vocabulary of {original_vocab_size}"
                ))
            })?;
            if let Some(prev) = slot {
                return Err(Error::RemapInconsistent(format!(
                    "original id {orig} is mapped twice (to {prev} and {new})"
                )));
            }
            *slot = Some(TokenId(new as u32));
        }
        let mut keep_tokens = keep_tokens;
        keep_tokens.sort_unstable();
        keep_tokens.dedup();
        if let Some(k) = keep_tokens
            .iter()
            .find(|k| forward.get(k.index()).copied().flatten().is_none())
        {
            return Err(Error::RemapInconsistent(format!(
                "keep token {k} is not part of the mapping"
            )));
        }
        Ok(Self {
            original_vocab_size,
            ordering,
            keep_tokens,
            forward,
            inverse,
        })
    }

    /// Identity mapping over a whole vocabulary.
    pub fn identity(vocab_size: usize) -> Self {
        let inverse = (0..vocab_size as u32).map(TokenId).collect();
        Self::from_inverse(vocab_size, RemapOrdering::AscendingId, Vec::new(), inverse)
            .expect("identity is a bijection")
    }

    pub fn original_vocab_size(&self) -> usize {
        self.original_vocab_size
    }

    /// Size of the reduced vocabulary.
    pub fn len(&self) -> usize {
        self.inverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inverse.is_empty()
    }

    pub fn ordering(&self) -> RemapOrdering {
        self.ordering
    }

    pub fn keep_tokens(&self) -> &[TokenId] {
        &self.keep_tokens
    }

    pub fn forward(&self, original: TokenId) -> Option<TokenId> {
        self.forward.get(original.index()).copied().flatten()
    }

    pub fn inverse(&self, dense: TokenId) -> Option<TokenId> {
        self.inverse.get(dense.index()).copied()
    }

    /// `inverse[new] = original` for every dense id.
    pub fn inverse_ids(&self) -> &[TokenId] {
        &self.inverse
    }

    /// `(original, new)` pairs sorted by `new`.
    pub fn pairs(&self) -> impl Iterator<Item = (TokenId, TokenId)> + '_ {
        self.inverse
            .iter()
            .enumerate()
            .map(|(new, &orig)| (orig, TokenId(new as u32)))
    }
}

/// Builds the remap over the used set of `freqs` plus `keep_tokens`.
pub fn build_remap(freqs: &FrequencyTable, ordering: RemapOrdering, keep_tokens: &[TokenId]) -> Result<RemapTable> {
    let vocab_size = freqs.vocab_size();
    if let Some(k) = keep_tokens.iter().find(|k| k.index() >= vocab_size) {
        return Err(Error::KeepTokenOutOfRange { id: k.0, vocab_size });
    }
    let mut retained: Vec<bool> = freqs.counts().iter().map(|&c| c > 0).collect();
    for k in keep_tokens {
        retained[k.index()] = true;
    }
    // Ascending id order falls out of the enumeration.
    let mut inverse: Vec<TokenId> = retained
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(i, _)| TokenId(i as u32))
        .collect();
    if ordering == RemapOrdering::FrequencyDescending {
        // Stable sort keeps ascending id among equal counts.
        inverse.sort_by_key(|t| std::cmp::Reverse(freqs.count(*t)));
    }
    RemapTable::from_inverse(vocab_size, ordering, keep_tokens.to_vec(), inverse)
}

/// Rewrites every token through the forward map. The result's vocabulary is
/// the reduced one.
pub fn apply_remap(dataset: &TokenizedDataset, remap: &RemapTable) -> Result<TokenizedDataset> {
    if dataset.vocab_size() != remap.original_vocab_size() {
        return Err(Error::VocabSizeMismatch {
            expected: remap.original_vocab_size(),
            found: dataset.vocab_size(),
        });
    }
    let sequences = dataset
        .sequences()
        .iter()
        .enumerate()
        .map(|(s, seq)| {
            seq.iter()
                .enumerate()
                .map(|(p, &tok)| {
                    remap.forward(tok).ok_or(Error::UnmappedToken {
                        sequence: s,
                        position: p,
                        id: tok.0,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TokenizedDataset {
        sequences,
        vocab_size: remap.len(),
    })
}

/// Maps a remapped dataset back to original ids.
pub fn invert_remap(dataset: &TokenizedDataset, remap: &RemapTable) -> Result<TokenizedDataset> {
    check_sequences(dataset.sequences(), remap.len(), 0)?;
    let sequences = dataset
        .sequences()
        .iter()
        .map(|seq| seq.iter().map(|&t| remap.inverse[t.index()]).collect())
        .collect();
    Ok(TokenizedDataset {
        sequences,
        vocab_size: remap.original_vocab_size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn ids(v: &[u32]) -> Vec<TokenId> {
        v.iter().copied().map(TokenId).collect()
    }

    fn counts_table(pairs: &[(u32, u64)], vocab_size: usize) -> FrequencyTable {
        let mut counts = vec![0; vocab_size];
        for &(i, c) in pairs {
            counts[i as usize] = c;
        }
        FrequencyTable::from_counts(counts)
    }

    #[test]
    fn scan_counts_occurrences() {
        let d = TokenizedDataset::from_ids(vec![vec![1, 2], vec![2, 3]], 5).unwrap();
        let t = scan_dataset(&d);
        assert_eq!(t.counts(), &[0, 1, 2, 1, 0]);
        assert_eq!(t.total_tokens(), 4);
        assert_eq!(t.used().collect::<Vec<_>>(), ids(&[1, 2, 3]));
    }

    #[test]
    fn scan_empty_dataset() {
        let t = scan_dataset(&TokenizedDataset::empty(10));
        assert_eq!(t.counts(), &[0; 10]);
        assert_eq!(t.total_tokens(), 0);
        assert_eq!(t.used_count(), 0);
    }

    #[test]
    fn out_of_range_token_reports_position() {
        let err = TokenizedDataset::from_ids(vec![vec![0], vec![1, 7]], 5).unwrap_err();
        match err {
            Error::OutOfRangeToken {
                sequence, position, id, ..
            } => assert_eq!((sequence, position, id), (1, 1, 7)),
            e => panic!("unexpected {e:?}"),
        }
        let err = scan_sequences(&[ids(&[9])], 5, 3).unwrap_err();
        assert!(matches!(err, Error::OutOfRangeToken { sequence: 3, .. }));
    }

    #[test]
    fn merge_sums_elementwise() {
        let a = FrequencyTable::from_counts(vec![1, 0]);
        let b = FrequencyTable::from_counts(vec![0, 2]);
        let m = merge_frequency_tables(&[a.clone(), b]).unwrap();
        assert_eq!(m.counts(), &[1, 2]);
        assert_eq!(m.total_tokens(), 3);
        assert_eq!(merge_frequency_tables(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn merge_rejects_mismatch_and_empty() {
        let a = FrequencyTable::zeros(2);
        let b = FrequencyTable::zeros(3);
        assert!(matches!(
            merge_frequency_tables(&[a, b]),
            Err(Error::VocabSizeMismatch { expected: 2, found: 3 })
        ));
        assert!(matches!(merge_frequency_tables(&[]), Err(Error::EmptyMerge)));
    }

    #[test]
    fn partition_ranges_cover_everything() {
        for len in 0..20 {
            for parts in 1..10 {
                let r = partition_ranges(len, parts);
                assert_eq!(r.len(), parts);
                assert_eq!(r[0].start, 0);
                assert_eq!(r.last().unwrap().end, len);
                assert!(r.windows(2).all(|w| w[0].end == w[1].start));
            }
        }
    }

    #[test]
    fn remap_ascending() {
        let t = FrequencyTable::from_counts(vec![0, 3, 0, 1]);
        let r = build_remap(&t, RemapOrdering::AscendingId, &[]).unwrap();
        assert_eq!(
            r.pairs().collect::<Vec<_>>(),
            vec![(TokenId(1), TokenId(0)), (TokenId(3), TokenId(1))]
        );
        assert_eq!(r.forward(TokenId(0)), None);
    }

    #[test]
    fn remap_frequency_descending_breaks_ties_by_id() {
        let t = counts_table(&[(5, 10), (2, 3), (9, 3)], 12);
        let r = build_remap(&t, RemapOrdering::FrequencyDescending, &[]).unwrap();
        assert_eq!(r.inverse_ids(), &ids(&[5, 2, 9])[..]);
    }

    #[test]
    fn remap_keep_tokens() {
        let t = FrequencyTable::from_counts(vec![0, 3, 0, 1]);
        let r = build_remap(&t, RemapOrdering::AscendingId, &[TokenId(0)]).unwrap();
        assert_eq!(r.inverse_ids(), &ids(&[0, 1, 3])[..]);
        assert_eq!(r.keep_tokens(), &[TokenId(0)]);

        // zero-count keep tokens sort as count 0, after every used token
        let r = build_remap(&t, RemapOrdering::FrequencyDescending, &[TokenId(2), TokenId(0)]).unwrap();
        assert_eq!(r.inverse_ids(), &ids(&[1, 3, 0, 2])[..]);

        assert!(matches!(
            build_remap(&t, RemapOrdering::AscendingId, &[TokenId(4)]),
            Err(Error::KeepTokenOutOfRange { id: 4, vocab_size: 4 })
        ));
    }

    #[test]
    fn full_usage_gives_identity() {
        let t = FrequencyTable::from_counts(vec![2, 1, 5]);
        let r = build_remap(&t, RemapOrdering::AscendingId, &[]).unwrap();
        assert_eq!(r, RemapTable::identity(3));
    }

    #[test]
    fn apply_and_invert() {
        let t = FrequencyTable::from_counts(vec![0, 3, 0, 1]);
        let r = build_remap(&t, RemapOrdering::AscendingId, &[]).unwrap();
        let d = TokenizedDataset::from_ids(vec![vec![1, 3, 1]], 4).unwrap();
        let out = apply_remap(&d, &r).unwrap();
        assert_eq!(out.sequences(), &[ids(&[0, 1, 0])]);
        assert_eq!(out.vocab_size(), 2);
        let back = invert_remap(&out, &r).unwrap();
        assert_eq!(back, d);

        let empty = apply_remap(&TokenizedDataset::empty(4), &r).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.vocab_size(), 2);
        assert_eq!(invert_remap(&empty, &r).unwrap(), TokenizedDataset::empty(4));
    }

    #[test]
    fn apply_rejects_unmapped_token() {
        let t = FrequencyTable::from_counts(vec![0, 3, 0, 1]);
        let r = build_remap(&t, RemapOrdering::AscendingId, &[]).unwrap();
        let d = TokenizedDataset::from_ids(vec![vec![1], vec![3, 2]], 4).unwrap();
        assert!(matches!(
            apply_remap(&d, &r),
            Err(Error::UnmappedToken {
                sequence: 1,
                position: 1,
                id: 2
            })
        ));
    }

    #[test]
    fn invert_rejects_out_of_range() {
        let r = RemapTable::from_inverse(4, RemapOrdering::AscendingId, vec![], ids(&[1, 3])).unwrap();
        let d = TokenizedDataset::from_ids(vec![vec![0, 2]], 3).unwrap();
        assert!(matches!(
            invert_remap(&d, &r),
            Err(Error::OutOfRangeToken { id: 2, .. })
        ));
    }

    #[test]
    fn from_inverse_rejects_non_bijection() {
        assert!(RemapTable::from_inverse(4, RemapOrdering::AscendingId, vec![], ids(&[1, 1])).is_err());
        assert!(RemapTable::from_inverse(4, RemapOrdering::AscendingId, vec![], ids(&[4])).is_err());
        assert!(RemapTable::from_inverse(4, RemapOrdering::AscendingId, ids(&[2]), ids(&[1])).is_err());
    }

    #[test]
    fn ordering_parses() {
        assert_eq!(
            "ascending-id".parse::<RemapOrdering>().unwrap(),
            RemapOrdering::AscendingId
        );
        assert_eq!(
            "frequency".parse::<RemapOrdering>().unwrap(),
            RemapOrdering::FrequencyDescending
        );
        assert!("random".parse::<RemapOrdering>().is_err());
    }

    fn dataset_strategy() -> impl Strategy<Value = TokenizedDataset> {
        (1usize..40).prop_flat_map(|vocab| {
            prop::collection::vec(prop::collection::vec(0..vocab as u32, 0..12), 0..16)
                .prop_map(move |seqs| TokenizedDataset::from_ids(seqs, vocab).unwrap())
        })
    }

    proptest! {
        #[test]
        fn scan_matches_hashmap_counter(d in dataset_strategy()) {
            let mut naive: HashMap<u32, u64> = HashMap::new();
            for seq in d.sequences() {
                for t in seq {
                    *naive.entry(t.0).or_default() += 1;
                }
            }
            let t = scan_dataset(&d);
            for i in 0..d.vocab_size() {
                prop_assert_eq!(t.counts()[i], naive.get(&(i as u32)).copied().unwrap_or(0));
            }
            prop_assert_eq!(t.total_tokens(), d.total_tokens());
        }

        #[test]
        fn scan_is_partition_invariant(d in dataset_strategy(), parts in 1usize..9) {
            prop_assert_eq!(scan_partitioned(&d, parts), scan_dataset(&d));
        }

        #[test]
        fn remap_is_bijective(d in dataset_strategy(), freq in any::<bool>(), keep in prop::collection::vec(0u32..40, 0..4)) {
            let t = scan_dataset(&d);
            let keep: Vec<TokenId> = keep.into_iter().filter(|&k| (k as usize) < d.vocab_size()).map(TokenId).collect();
            let ordering = if freq { RemapOrdering::FrequencyDescending } else { RemapOrdering::AscendingId };
            let r = build_remap(&t, ordering, &keep).unwrap();
            let mut expected: Vec<TokenId> = t.used().chain(keep.iter().copied()).collect();
            expected.sort();
            expected.dedup();
            prop_assert_eq!(r.len(), expected.len());
            for j in 0..r.len() {
                let orig = r.inverse(TokenId(j as u32)).unwrap();
                prop_assert_eq!(r.forward(orig), Some(TokenId(j as u32)));
            }
            for i in 0..d.vocab_size() as u32 {
                let in_domain = expected.binary_search(&TokenId(i)).is_ok();
                prop_assert_eq!(r.forward(TokenId(i)).is_some(), in_domain);
            }

            let out = apply_remap(&d, &r).unwrap();
            prop_assert_eq!(out.len(), d.len());
            for (a, b) in out.sequences().iter().zip(d.sequences()) {
                prop_assert_eq!(a.len(), b.len());
            }
            prop_assert_eq!(invert_remap(&out, &r).unwrap(), d);
        }
    }
}
