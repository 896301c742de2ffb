//! On-disk formats. All binary integers and floats are little-endian.
//!
//! Token dataset, binary (`DEPT`):
//!
//! ```text
//! "DEPT" | u32 version = 1 | u64 vocab_size | u64 num_sequences
//! then per sequence: u32 length | length × u32 id
//! ```
//!
//! Token dataset, text: one sequence per line, ids as space-separated
//! decimals. The vocabulary size is not stored and must be supplied.
//!
//! Embedding matrix (`DEPE`):
//!
//! ```text
//! "DEPE" | u32 version = 1 | u8 dtype (1 = f32) | u64 rows | u64 cols
//! then rows × cols values, row-major
//! ```
//!
//! Remap: JSON `{original_vocab_size, ordering, keep_tokens, pairs}` with
//! `pairs` as `[original, new]` sorted by `new`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::vocab::{RemapOrdering, RemapTable, TokenId, TokenizedDataset};

pub const DATASET_MAGIC: &[u8; 4] = b"DEPT";
pub const EMBEDDING_MAGIC: &[u8; 4] = b"DEPE";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 1;

fn truncated(what: &str) -> Error {
    Error::Parse(format!("unexpected end of data while reading {what}"))
}

/// Little-endian cursor over an in-memory buffer.
struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(truncated(what));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let found = self.buf.get(..4).unwrap_or(self.buf);
        if found != expected {
            return Err(Error::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        self.buf = &self.buf[4..];
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Parse(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

fn to_usize(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Parse(format!("{what} {v} does not fit in memory")))
}

/// Which dataset encoding a byte buffer holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Text,
    Binary,
}

impl DatasetFormat {
    /// Text when every byte is an ASCII digit or whitespace, binary
    /// otherwise. A binary buffer is not checked for its magic here.
    pub fn detect(bytes: &[u8]) -> Self {
        if bytes.iter().all(|b| b.is_ascii_digit() || b.is_ascii_whitespace()) {
            DatasetFormat::Text
        } else {
            DatasetFormat::Binary
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            DatasetFormat::Text => "txt",
            DatasetFormat::Binary => "dept",
        }
    }
}

pub fn encode_dataset_binary(dataset: &TokenizedDataset) -> Vec<u8> {
    let total = dataset.total_tokens() as usize;
    let mut out = Vec::with_capacity(24 + 4 * (dataset.len() + total));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dataset.vocab_size() as u64).to_le_bytes());
    out.extend_from_slice(&(dataset.len() as u64).to_le_bytes());
    for seq in dataset.sequences() {
        out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
        for t in seq {
            out.extend_from_slice(&t.0.to_le_bytes());
        }
    }
    out
}

pub fn decode_dataset_binary(bytes: &[u8]) -> Result<TokenizedDataset> {
    let mut r = Reader { buf: bytes };
    r.magic(DATASET_MAGIC)?;
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let vocab_size = to_usize(r.u64("vocab_size")?, "vocab_size")?;
    let num_sequences = to_usize(r.u64("num_sequences")?, "num_sequences")?;
    // Each sequence needs at least its 4-byte length; cap the reservation so
    // a corrupt header cannot trigger a huge allocation.
    let mut sequences = Vec::with_capacity(num_sequences.min(r.buf.len() / 4));
    for _ in 0..num_sequences {
        let len = r.u32("sequence length")? as usize;
        let raw = r.take(len * 4, "sequence ids")?;
        sequences.push(
            raw.chunks_exact(4)
                .map(|c| TokenId(u32::from_le_bytes(c.try_into().unwrap())))
                .collect(),
        );
    }
    r.finish()?;
    TokenizedDataset::new(sequences, vocab_size)
}

pub fn encode_dataset_text(dataset: &TokenizedDataset) -> String {
    let mut out = String::new();
    for seq in dataset.sequences() {
        let mut first = true;
        for t in seq {
            if !first {
                out.push(' ');
            }
            out.push_str(&t.0.to_string());
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Parses the text format. A final newline does not start a new sequence;
/// other empty lines are empty sequences, and an empty file has none.
pub fn decode_dataset_text(text: &str, vocab_size: usize) -> Result<TokenizedDataset> {
    if text.is_empty() {
        return Ok(TokenizedDataset::empty(vocab_size));
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    let sequences = body
        .split('\n')
        .enumerate()
        .map(|(line, l)| {
            l.split_ascii_whitespace()
                .map(|tok| {
                    tok.parse::<u32>()
                        .map(TokenId)
                        .map_err(|_| Error::Parse(format!("line {}: {tok:?} is not a token id", line + 1)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    TokenizedDataset::new(sequences, vocab_size)
}

/// Decodes either dataset encoding. `vocab_size` is required for text and,
/// when given for a binary file, must match its header.
pub fn decode_dataset(bytes: &[u8], vocab_size: Option<usize>) -> Result<(TokenizedDataset, DatasetFormat)> {
    match DatasetFormat::detect(bytes) {
        DatasetFormat::Text => {
            let vocab_size =
                vocab_size.ok_or_else(|| Error::Parse("text datasets need an explicit vocabulary size".into()))?;
            let text = std::str::from_utf8(bytes).expect("ascii checked by detect");
            Ok((decode_dataset_text(text, vocab_size)?, DatasetFormat::Text))
        }
        DatasetFormat::Binary => {
            let d = decode_dataset_binary(bytes)?;
            if let Some(v) = vocab_size {
                if v != d.vocab_size() {
                    return Err(Error::VocabSizeMismatch {
                        expected: v,
                        found: d.vocab_size(),
                    });
                }
            }
            Ok((d, DatasetFormat::Binary))
        }
    }
}

pub fn encode_dataset(dataset: &TokenizedDataset, format: DatasetFormat) -> Vec<u8> {
    match format {
        DatasetFormat::Text => encode_dataset_text(dataset).into_bytes(),
        DatasetFormat::Binary => encode_dataset_binary(dataset),
    }
}

pub fn encode_embeddings(matrix: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + matrix.data().len() * 4);
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&(matrix.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.dim() as u64).to_le_bytes());
    for v in matrix.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let mut r = Reader { buf: bytes };
    r.magic(EMBEDDING_MAGIC)?;
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dtype = r.u8("dtype")?;
    if dtype != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(dtype));
    }
    let rows = to_usize(r.u64("rows")?, "rows")?;
    let cols = to_usize(r.u64("cols")?, "cols")?;
    let n = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Parse(format!("{rows}x{cols} matrix is too large")))?;
    let payload = r.take(n, "matrix payload")?;
    r.finish()?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(rows, cols, data)
}

pub fn read_embeddings(mut reader: impl Read) -> Result<EmbeddingMatrix> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode_embeddings(&bytes)
}

pub fn write_embeddings(mut writer: impl Write, matrix: &EmbeddingMatrix) -> Result<()> {
    writer.write_all(&encode_embeddings(matrix))?;
    Ok(())
}

/// Serialized form of a [`RemapTable`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemapFile {
    pub original_vocab_size: usize,
    pub ordering: RemapOrdering,
    pub keep_tokens: Vec<u32>,
    pub pairs: Vec<[u32; 2]>,
}

impl From<&RemapTable> for RemapFile {
    fn from(r: &RemapTable) -> Self {
        RemapFile {
            original_vocab_size: r.original_vocab_size(),
            ordering: r.ordering(),
            keep_tokens: r.keep_tokens().iter().map(|t| t.0).collect(),
            pairs: r.pairs().map(|(o, n)| [o.0, n.0]).collect(),
        }
    }
}

impl TryFrom<RemapFile> for RemapTable {
    type Error = Error;

    fn try_from(f: RemapFile) -> Result<Self> {
        let mut inverse = Vec::with_capacity(f.pairs.len());
        for (i, [orig, new]) in f.pairs.iter().copied().enumerate() {
            if new as usize != i {
                return Err(Error::RemapInconsistent(format!(
                    "pair {i} has new id {new}; pairs must list new ids 0, 1, 2, ... in order"
                )));
            }
            inverse.push(TokenId(orig));
        }
        RemapTable::from_inverse(
            f.original_vocab_size,
            f.ordering,
            f.keep_tokens.into_iter().map(TokenId).collect(),
            inverse,
        )
    }
}

pub fn encode_remap(remap: &RemapTable) -> String {
    let mut s = serde_json::to_string(&RemapFile::from(remap)).expect("remap serializes");
    s.push('\n');
    s
}

pub fn decode_remap(json: &str) -> Result<RemapTable> {
    let file: RemapFile = serde_json::from_str(json)?;
    file.try_into()
}
