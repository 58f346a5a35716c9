use thiserror::Error;

use super::embed::EmbeddingVector;
use crate::exec::Exec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("cannot take the cosine of a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Row-major `rows.len() x cols.len()` cosine matrix.
pub fn similarity_matrix(
    rows: &[EmbeddingVector],
    cols: &[EmbeddingVector],
    exec: Exec,
) -> Vec<Vec<f64>> {
    exec.map_slice(rows, |r| {
        cols.iter()
            .map(|c| cosine(r.as_slice(), c.as_slice()).expect("embeddings are non-zero with equal width"))
            .collect()
    })
}
