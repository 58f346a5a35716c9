use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{self, ClientError};

/// Width of every header embedding.
pub const EMBEDDING_DIM: usize = 768;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("nothing to embed")]
    NoTexts,
    #[error("text #{0} is blank")]
    BlankText(usize),
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error("embedder returned dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedder returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding has a non-finite entry")]
    NonFinite,
    #[error("embedding is the zero vector")]
    ZeroVector,
}

/// A unit-length 768-dimensional embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Validates and L2-normalises `values`.
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.len() != EMBEDDING_DIM {
            return Err(EmbedError::DimensionMismatch {
                expected: EMBEDDING_DIM,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbedError::ZeroVector);
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Turns header strings into raw vectors. Implementations return one
/// vector per text; validation and normalisation happen in [`embed`].
pub trait Embedder: Send + Sync {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;

    fn name(&self) -> &str;
}

/// Embeds `texts`, enforcing the dimension and unit-norm contract.
pub fn embed(texts: &[String], embedder: &dyn Embedder) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::NoTexts);
    }
    let trimmed: Vec<String> = texts.iter().map(|t| t.trim().to_string()).collect();
    if let Some(i) = trimmed.iter().position(String::is_empty) {
        return Err(EmbedError::BlankText(i));
    }
    let raw = embedder.embed_raw(&trimmed)?;
    if raw.len() != texts.len() {
        return Err(EmbedError::CountMismatch {
            expected: texts.len(),
            got: raw.len(),
        });
    }
    raw.into_iter().map(EmbeddingVector::new).collect()
}

/// Deterministic stand-in embedder: a signed, hashed bag of character
/// trigrams.
///
/// Text is lower-cased and split into tokens at every non-alphanumeric
/// character. Each token is wrapped in `^`/`$` markers and its trigrams are
/// hashed (FNV-1a) into one of 768 buckets with a hash-derived sign.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashedTrigramEmbedder;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl HashedTrigramEmbedder {
    pub fn vector(text: &str) -> Vec<f64> {
        let mut v = vec![0.0; EMBEDDING_DIM];
        let lower = text.to_lowercase();
        let mut tokens: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            tokens.push(lower.trim());
        }
        for tok in tokens {
            let chars: Vec<char> = std::iter::once('^')
                .chain(tok.chars())
                .chain(std::iter::once('$'))
                .collect();
            for w in chars.windows(3.min(chars.len())) {
                let gram: String = w.iter().collect();
                let h = fnv1a(gram.as_bytes());
                let idx = (h % EMBEDDING_DIM as u64) as usize;
                let sign = if (h >> 40) & 1 == 0 { 1.0 } else { -1.0 };
                v[idx] += sign;
            }
        }
        v
    }
}

impl Embedder for HashedTrigramEmbedder {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| Self::vector(t)).collect())
    }

    fn name(&self) -> &str {
        "hashed-trigram"
    }
}

/// Client for an embedding sidecar.
///
/// `POST {base}/embed` with `{"texts": [...]}` returns
/// `{"vectors": [[...768 reals...], ...]}`. `GET {base}/health` returns
/// `{"model": ..., "dim": 768}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    pub base_url: String,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderHealth {
    pub model: String,
    pub dim: usize,
}

fn unavailable(e: ClientError) -> EmbedError {
    EmbedError::EmbedderUnavailable(e.to_string())
}

impl RemoteEmbedder {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
        }
    }

    /// Queries the health endpoint and refuses any dimension other than 768.
    pub fn verify(&self) -> Result<EmbedderHealth, EmbedError> {
        let health: EmbedderHealth =
            http::get_json(&http::join(&self.base_url, "health")).map_err(unavailable)?;
        if health.dim != EMBEDDING_DIM {
            return Err(EmbedError::DimensionMismatch {
                expected: EMBEDDING_DIM,
                got: health.dim,
            });
        }
        Ok(health)
    }
}

impl Embedder for RemoteEmbedder {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let resp: EmbedResponse = http::post_json(
            &http::join(&self.base_url, "embed"),
            &EmbedRequest { texts },
        )
        .map_err(unavailable)?;
        if let Some(bad) = resp.vectors.iter().find(|v| v.len() != EMBEDDING_DIM) {
            return Err(EmbedError::DimensionMismatch {
                expected: EMBEDDING_DIM,
                got: bad.len(),
            });
        }
        Ok(resp.vectors)
    }

    fn name(&self) -> &str {
        &self.base_url
    }
}
