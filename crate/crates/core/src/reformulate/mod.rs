//! Query reformulation from retrieved categories.
//!
//! Two forms are produced from the rank-ordered categories of the retrieved
//! articles:
//!
//! * [`SentenceQuery`]: every category joined with single spaces, article by
//!   article in rank order, repeats kept, cut to a token budget. Used with
//!   sentence (contextual) embedders.
//! * [`WeightedKeywordQuery`]: keywords extracted from all categories, each
//!   weighted by its occurrence count. Used with static word vectors. No
//!   token budget applies.

mod keywords;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use keywords::{category_words, extract_keywords, ExternalCommand, ExtractorConfig, Strategy};

use crate::retrieval::{RankedArticle, RetrievalError, Retriever};
use crate::tokenizer::{truncate_to_budget, Tokenizer};

pub const DEFAULT_TOKEN_BUDGET: usize = 512;

#[derive(Debug, Error)]
pub enum ReformulateError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("token budget must be >= 1")]
    InvalidBudget,
    #[error("retrieval failed: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("no keywords extracted")]
    NoKeywords,
    #[error("external extractor {command:?} failed: {diagnostics}")]
    External { command: String, diagnostics: String },
    #[error("external extractor output line {line}: {reason}")]
    ExternalProtocol { line: usize, reason: String },
}

/// The input text to classify. Never blank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawQuery(String);

impl RawQuery {
    pub fn new(text: impl Into<String>) -> Result<Self, ReformulateError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ReformulateError::EmptyQuery);
        }
        Ok(RawQuery(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceQuery {
    pub text: String,
    pub token_count: usize,
    /// Article rank of each category that made it into `text`, in order.
    /// The last one may have been cut mid-string.
    pub source_ranks: Vec<usize>,
}

impl SentenceQuery {
    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedKeywordQuery {
    /// Unique keywords with their counts, by count descending then keyword.
    pub entries: Vec<(String, u64)>,
}

impl WeightedKeywordQuery {
    /// Builds a query from arbitrary (keyword, weight) pairs, merging repeats
    /// and restoring the canonical order. Zero weights are dropped.
    pub fn from_counts<I: IntoIterator<Item = (String, u64)>>(pairs: I) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for (k, w) in pairs {
            if w > 0 {
                *counts.entry(k).or_insert(0) += w;
            }
        }
        WeightedKeywordQuery {
            entries: keywords::sort_counts(counts),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, n: usize) -> &[(String, u64)] {
        &self.entries[..n.min(self.entries.len())]
    }
}

/// Ranked articles for `query`; `k` is usually [`crate::retrieval::DEFAULT_TOP_K`].
pub fn retrieve_categories(
    query: &RawQuery,
    retriever: &dyn Retriever,
    k: usize,
) -> Result<Vec<RankedArticle>, ReformulateError> {
    Ok(retriever.retrieve(query.as_str(), k)?)
}

/// Categories of `articles` in rank order, each paired with its article rank.
/// Blank categories are skipped.
pub fn ranked_categories(articles: &[RankedArticle]) -> Vec<(usize, &str)> {
    let mut sorted: Vec<&RankedArticle> = articles.iter().collect();
    sorted.sort_by_key(|a| a.rank);
    sorted
        .into_iter()
        .flat_map(|a| {
            a.categories
                .iter()
                .map(|c| c.trim())
                .filter(|c| !c.is_empty())
                .map(move |c| (a.rank, c))
        })
        .collect()
}

pub fn make_sentence_query(
    articles: &[RankedArticle],
    tokenizer: &dyn Tokenizer,
    budget: usize,
) -> Result<SentenceQuery, ReformulateError> {
    if budget == 0 {
        return Err(ReformulateError::InvalidBudget);
    }
    let cats = ranked_categories(articles);
    let mut joined = String::new();
    let mut starts = Vec::with_capacity(cats.len());
    for (i, (_, c)) in cats.iter().enumerate() {
        if i > 0 {
            joined.push(' ');
        }
        starts.push(joined.len());
        joined.push_str(c);
    }
    let (text, token_count) = truncate_to_budget(tokenizer, &joined, budget);
    let source_ranks = cats
        .iter()
        .zip(&starts)
        .take_while(|(_, &start)| start < text.len())
        .map(|((rank, _), _)| *rank)
        .collect();
    Ok(SentenceQuery {
        text: text.to_string(),
        token_count,
        source_ranks,
    })
}

pub fn make_keyword_query(
    articles: &[RankedArticle],
    config: &ExtractorConfig,
) -> Result<WeightedKeywordQuery, ReformulateError> {
    let cats: Vec<&str> = ranked_categories(articles).into_iter().map(|(_, c)| c).collect();
    let entries = extract_keywords(&cats, config)?;
    if entries.is_empty() {
        return Err(ReformulateError::NoKeywords);
    }
    Ok(WeightedKeywordQuery { entries })
}
