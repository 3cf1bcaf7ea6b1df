//! Sparse retrieval: analysis, inverted index, BM25 ranking, persistence.

mod analysis;
mod bm25;
mod index;
pub mod persist;

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

pub use analysis::{analyze, AnalysisConfig, Analyzer};
pub use bm25::{bm25_score, idf, tf_weight, Bm25Params};
pub use index::{build_index, DocOrd, InvertedIndex, Posting, RankedArticle};

/// Number of articles whose categories feed reformulation by default.
pub const DEFAULT_TOP_K: usize = 50;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("empty corpus after filtering")]
    EmptyCorpus,
    #[error("duplicate document id {0:?}")]
    DuplicateDoc(String),
    #[error("index unavailable: {0}")]
    Unavailable(String),
    #[error("index corrupt: {0}")]
    Corrupt(String),
    #[error("index was built with analysis {index:?} but {requested:?} was requested")]
    AnalysisMismatch {
        index: AnalysisConfig,
        requested: AnalysisConfig,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// Anything that can map a query to ranked, category-bearing articles.
///
/// Only a BM25 backend ships; a dense retriever would implement this too.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<RankedArticle>, RetrievalError>;

    /// Stable description of the backend and its settings, for fingerprints.
    fn describe(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct Bm25Retriever {
    index: Arc<InvertedIndex>,
    params: Bm25Params,
}

impl Bm25Retriever {
    pub fn new(index: Arc<InvertedIndex>, params: Bm25Params) -> Result<Self, RetrievalError> {
        params.validate()?;
        Ok(Bm25Retriever { index, params })
    }

    /// Opens a persisted index, checking that it was built with `analysis`.
    pub fn open(dir: &Path, analysis: &AnalysisConfig, params: Bm25Params) -> Result<Self, RetrievalError> {
        let index = persist::load_checked(dir, analysis)?;
        Self::new(Arc::new(index), params)
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }
}

impl Retriever for Bm25Retriever {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<RankedArticle>, RetrievalError> {
        self.index.search(query, k, self.params)
    }

    fn describe(&self) -> String {
        let a = self.index.analysis();
        format!(
            "bm25(k1={},b={},stopwords={},stem={},n={},tokens={})",
            self.params.k1,
            self.params.b,
            a.remove_stopwords,
            a.stem,
            self.index.num_docs(),
            self.index.total_tokens
        )
    }
}
