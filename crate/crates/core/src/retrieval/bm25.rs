use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// Okapi BM25 parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(RetrievalError::Contract(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::Contract(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`; positive for every `df <= N`.
#[inline]
pub fn idf(df: u64, n_docs: u64) -> f64 {
    let df = df as f64;
    (1.0 + (n_docs as f64 - df + 0.5) / (df + 0.5)).ln()
}

/// Saturated term-frequency component.
#[inline]
pub fn tf_weight(tf: u64, dl: u64, avgdl: f64, params: Bm25Params) -> f64 {
    let tf = tf as f64;
    let norm = 1.0 - params.b + params.b * dl as f64 / avgdl;
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

/// BM25 contribution of one term to one document, with precondition checks.
pub fn bm25_score(
    tf: u64,
    df: u64,
    dl: u64,
    n_docs: u64,
    avgdl: f64,
    params: Bm25Params,
) -> Result<f64, RetrievalError> {
    params.validate()?;
    if tf < 1 {
        return Err(RetrievalError::Contract("tf must be >= 1".into()));
    }
    if df < 1 || df > n_docs {
        return Err(RetrievalError::Contract(format!(
            "df must be in 1..={n_docs}, got {df}"
        )));
    }
    if dl < 1 {
        return Err(RetrievalError::Contract("dl must be >= 1".into()));
    }
    if !(avgdl.is_finite() && avgdl > 0.0) {
        return Err(RetrievalError::Contract(format!("avgdl must be > 0, got {avgdl}")));
    }
    Ok(idf(df, n_docs) * tf_weight(tf, dl, avgdl, params))
}
