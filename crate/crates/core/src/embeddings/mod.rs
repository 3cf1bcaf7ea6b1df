//! Embedding providers and cosine similarity.

#[cfg(feature = "mock-server")]
pub mod mock;
mod remote;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::{RemoteEmbedder, RemoteEmbedderConfig, AUTH_TOKEN_ENV};
pub use store::{load_static_vectors, PhraseEmbedding, StaticVectorStore};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("{path}, line {line}: {reason}")]
    VectorFile {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no word of {0:?} is in the vocabulary")]
    PhraseOutOfVocabulary(String),
    #[error("embedding request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("embedding server rejected the request ({status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed embedding response: {0}")]
    Protocol(String),
}

/// A finite, non-empty vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Contract("empty vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::Contract(format!("non-finite value at position {i}")));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Element-wise mean of equally sized slices, accumulated in f64.
    pub fn mean<'a, I>(vectors: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a [f32]>,
    {
        let mut acc: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for v in vectors {
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            debug_assert_eq!(acc.len(), v.len());
            for (a, x) in acc.iter_mut().zip(v) {
                *a += *x as f64;
            }
            n += 1;
        }
        (n > 0).then(|| EmbeddingVector(acc.into_iter().map(|a| (a / n as f64) as f32).collect()))
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = EmbeddingError;
    fn try_from(v: Vec<f32>) -> Result<Self, Self::Error> {
        EmbeddingVector::new(v)
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// `dot(a, b) / (|a| |b|)` over raw slices, computed in f64.
pub fn cosine_slices(a: &[f32], b: &[f32]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::Contract(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::Contract("cosine of a zero-norm vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    cosine_slices(&a.0, &b.0)
}

/// Produces one vector per input text (sentence-level embeddings).
pub trait SentenceEmbedder: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    /// Stable description for config fingerprints.
    fn describe(&self) -> String;

    /// Whether identical inputs are guaranteed to give identical vectors.
    fn is_deterministic(&self) -> bool {
        false
    }
}
