//! Token embedding matrices and the row gather/scatter that moves them
//! between the full and the reduced vocabulary.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vocab::{RemapTable, TokenId};

/// Row-major `rows × dim` matrix of `f32`, one row per token.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMatrix("dim must be at least 1".into()));
        }
        let expected = rows
            .checked_mul(dim)
            .ok_or_else(|| Error::InvalidMatrix(format!("{rows}x{dim} overflows")))?;
        if data.len() != expected {
            return Err(Error::InvalidMatrix(format!(
                "{rows}x{dim} matrix needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }

    /// Like [`EmbeddingMatrix::new`], additionally rejecting NaN and infinities.
    pub fn new_finite(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        let m = Self::new(rows, dim, data)?;
        let summary = validate_matrix(&m);
        if summary.non_finite > 0 {
            return Err(Error::InvalidMatrix(format!(
                "{} non-finite values",
                summary.non_finite
            )));
        }
        Ok(m)
    }

    pub fn zeros(rows: usize, dim: usize) -> Result<Self> {
        Self::new(rows, dim, vec![0.0; rows * dim])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Payload size in bytes at 32-bit precision.
    pub fn size_bytes(&self) -> u64 {
        self.data.len() as u64 * std::mem::size_of::<f32>() as u64
    }

    /// Bitwise equality, so NaN payloads and signed zeros compare exactly.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.dim == other.dim
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Gathers the rows of the retained tokens into a `remap.len() × dim` matrix.
/// Row `forward[i]` of the output is a bit copy of row `i` of the input.
pub fn prune_embeddings(matrix: &EmbeddingMatrix, remap: &RemapTable) -> Result<EmbeddingMatrix> {
    if matrix.rows() != remap.original_vocab_size() {
        return Err(Error::ShapeMismatch(format!(
            "matrix has {} rows but the remap covers a vocabulary of {}",
            matrix.rows(),
            remap.original_vocab_size()
        )));
    }
    let dim = matrix.dim();
    let mut data = Vec::with_capacity(remap.len() * dim);
    for &orig in remap.inverse_ids() {
        data.extend_from_slice(matrix.row(orig.index()));
    }
    EmbeddingMatrix::new(remap.len(), dim, data)
}

/// Scatters the learned reduced rows back over a copy of the original matrix.
/// Rows outside the remap's domain keep their original bits.
pub fn restore_embeddings(
    original: &EmbeddingMatrix,
    learned: &EmbeddingMatrix,
    remap: &RemapTable,
) -> Result<EmbeddingMatrix> {
    if original.rows() != remap.original_vocab_size() {
        return Err(Error::ShapeMismatch(format!(
            "original matrix has {} rows but the remap covers a vocabulary of {}",
            original.rows(),
            remap.original_vocab_size()
        )));
    }
    if learned.rows() != remap.len() {
        return Err(Error::ShapeMismatch(format!(
            "learned matrix has {} rows but the remap retains {} tokens",
            learned.rows(),
            remap.len()
        )));
    }
    if learned.dim() != original.dim() {
        return Err(Error::ShapeMismatch(format!(
            "learned dim {} differs from original dim {}",
            learned.dim(),
            original.dim()
        )));
    }
    let mut out = original.clone();
    for (new, &orig) in remap.inverse_ids().iter().enumerate() {
        out.row_mut(orig.index()).copy_from_slice(learned.row(new));
    }
    Ok(out)
}

/// Looks up embedding rows for a sequence of ids.
pub fn lookup(matrix: &EmbeddingMatrix, tokens: &[TokenId]) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(tokens.len() * matrix.dim());
    for t in tokens {
        if t.index() >= matrix.rows() {
            return Err(Error::ShapeMismatch(format!(
                "token {t} has no row in a {}-row matrix",
                matrix.rows()
            )));
        }
        out.extend_from_slice(matrix.row(t.index()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub rows: usize,
    pub dim: usize,
    pub non_finite: usize,
    /// Smallest finite value, if any.
    pub min: Option<f32>,
    /// Largest finite value, if any.
    pub max: Option<f32>,
}

pub fn validate_matrix(matrix: &EmbeddingMatrix) -> ValidationSummary {
    let mut non_finite = 0;
    let mut min: Option<f32> = None;
    let mut max: Option<f32> = None;
    for &v in matrix.data() {
        if !v.is_finite() {
            non_finite += 1;
            continue;
        }
        min = Some(min.map_or(v, |m| m.min(v)));
        max = Some(max.map_or(v, |m| m.max(v)));
    }
    ValidationSummary {
        rows: matrix.rows(),
        dim: matrix.dim(),
        non_finite,
        min,
        max,
    }
}
