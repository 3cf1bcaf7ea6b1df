//! Zero-shot classification by embedding similarity.
//!
//! * Contextual: cosine between one sentence embedding and each label embedding.
//! * Static: for every label `y`, `score(y) = Σ w · cos(vec(K), vec(y))` over
//!   the weighted keywords `(K, w)`; label phrases are embedded as the mean of
//!   their words.
//!
//! Ties go to the label declared first.

mod pipeline;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pipeline::{Pipeline, PipelineError, PipelineOptions, Provider, QueryForm, Stage, StaticBaseline, Variant};

use crate::embeddings::{cosine, cosine_slices, EmbeddingError, EmbeddingVector, SentenceEmbedder, StaticVectorStore};
use crate::reformulate::{category_words, WeightedKeywordQuery};

/// Explain payload limits.
pub const EXPLAIN_CATEGORIES: usize = 50;
pub const EXPLAIN_KEYWORDS: usize = 10;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("invalid label set: {0}")]
    InvalidLabels(String),
    #[error("label {0:?} has no in-vocabulary words")]
    LabelOutOfVocabulary(String),
    #[error("none of the keywords has a usable vector")]
    NoEmbeddableKeywords,
    #[error("query is empty; classify the original text with the baseline instead")]
    EmptyQuery,
    #[error("embedding failed: {0}")]
    Embedding(#[from] EmbeddingError),
}

/// Candidate labels in declaration order (which is also the tie-break order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet(Vec<String>);

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self, ClassifyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<String> = Vec::new();
        for l in labels {
            let l = l.as_ref().trim();
            if l.is_empty() {
                return Err(ClassifyError::InvalidLabels("empty label".into()));
            }
            if out.iter().any(|x| x == l) {
                return Err(ClassifyError::InvalidLabels(format!("duplicate label {l:?}")));
            }
            out.push(l.to_string());
        }
        if out.len() < 2 {
            return Err(ClassifyError::InvalidLabels("at least two labels are required".into()));
        }
        Ok(LabelSet(out))
    }

    /// One label per line; blank lines are skipped.
    pub fn from_file(path: &Path) -> Result<Self, ClassifyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClassifyError::InvalidLabels(format!("{}: {e}", path.display())))?;
        Self::new(text.lines().filter(|l| !l.trim().is_empty()))
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.0.iter().any(|l| l == label)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    /// One score per label, in label-set order.
    pub scores: Vec<(String, f64)>,
    pub best: String,
    /// Best score minus runner-up score.
    pub margin: f64,
}

impl ScoreTable {
    /// `scores` must line up with `labels`.
    pub fn new(labels: &LabelSet, scores: Vec<f64>) -> Self {
        assert_eq!(labels.len(), scores.len(), "one score per label");
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        let runner_up = scores
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        ScoreTable {
            best: labels.0[best].clone(),
            margin: scores[best] - runner_up,
            scores: labels.0.iter().cloned().zip(scores).collect(),
        }
    }

    pub fn score(&self, label: &str) -> Option<f64> {
        self.scores.iter().find(|(l, _)| l == label).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Contextual,
    Static,
    BaselineContextual,
    BaselineStatic,
}

impl Mode {
    pub fn is_baseline(self) -> bool {
        matches!(self, Mode::BaselineContextual | Mode::BaselineStatic)
    }
}

/// Retrieved context shown alongside a prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explain {
    /// Categories in article-rank order, repeats kept.
    pub categories: Vec<String>,
    pub keywords: Vec<(String, u64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Keywords (or raw words) with no usable vector; they scored 0.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub oov: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub predicted: String,
    pub table: ScoreTable,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub explain: Option<Explain>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl ClassificationResult {
    fn new(labels: &LabelSet, scores: Vec<f64>, mode: Mode) -> Self {
        let table = ScoreTable::new(labels, scores);
        ClassificationResult {
            predicted: table.best.clone(),
            table,
            mode,
            explain: None,
            diagnostics: Diagnostics::default(),
        }
    }
}

fn contextual_scores(query: &EmbeddingVector, label_vecs: &[EmbeddingVector]) -> Result<Vec<f64>, ClassifyError> {
    label_vecs
        .iter()
        .map(|l| cosine(query, l).map_err(ClassifyError::from))
        .collect()
}

/// Embeds `query_text` and every label in one call and picks the closest label.
pub fn classify_contextual(
    query_text: &str,
    labels: &LabelSet,
    embedder: &dyn SentenceEmbedder,
) -> Result<ClassificationResult, ClassifyError> {
    if query_text.trim().is_empty() {
        return Err(ClassifyError::EmptyQuery);
    }
    let mut texts: Vec<&str> = vec![query_text];
    texts.extend(labels.labels().iter().map(String::as_str));
    let vecs = embedder.embed(&texts)?;
    if vecs.len() != texts.len() {
        return Err(EmbeddingError::Protocol("embedder returned the wrong number of vectors".into()).into());
    }
    let scores = contextual_scores(&vecs[0], &vecs[1..])?;
    Ok(ClassificationResult::new(labels, scores, Mode::Contextual))
}

/// Like [`classify_contextual`] with label vectors computed beforehand.
pub(crate) fn classify_contextual_cached(
    query_text: &str,
    labels: &LabelSet,
    label_vecs: &[EmbeddingVector],
    embedder: &dyn SentenceEmbedder,
) -> Result<ClassificationResult, ClassifyError> {
    if query_text.trim().is_empty() {
        return Err(ClassifyError::EmptyQuery);
    }
    let q = embedder.embed(&[query_text])?;
    let q = q
        .into_iter()
        .next()
        .ok_or_else(|| EmbeddingError::Protocol("embedder returned no vector".into()))?;
    let scores = contextual_scores(&q, label_vecs)?;
    Ok(ClassificationResult::new(labels, scores, Mode::Contextual))
}

/// Label phrase vectors, failing on the first label with no known word.
pub fn embed_labels(labels: &LabelSet, store: &StaticVectorStore) -> Result<Vec<EmbeddingVector>, ClassifyError> {
    labels
        .labels()
        .iter()
        .map(|l| match store.embed_phrase(l) {
            Ok(p) if p.vector.norm() > 0.0 => Ok(p.vector),
            _ => Err(ClassifyError::LabelOutOfVocabulary(l.clone())),
        })
        .collect()
}

/// Weighted cosine accumulation shared by the keyword classifier and the
/// unit-weight baseline. Words without a usable vector are skipped and listed.
fn weighted_scores<'a, I>(
    entries: I,
    label_vecs: &[EmbeddingVector],
    store: &StaticVectorStore,
) -> Result<(Vec<f64>, Vec<String>), ClassifyError>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut kept: Vec<(&[f32], f64)> = Vec::new();
    let mut oov = Vec::new();
    for (word, w) in entries {
        match store.get(word) {
            Some(v) if crate::embeddings::norm(v) > 0.0 => kept.push((v, w)),
            _ => oov.push(word.to_string()),
        }
    }
    if kept.is_empty() {
        return Err(ClassifyError::NoEmbeddableKeywords);
    }
    let mut scores = Vec::with_capacity(label_vecs.len());
    for label in label_vecs {
        let mut total = 0.0;
        for &(v, w) in &kept {
            total += cosine_slices(v, label.values())? * w;
        }
        scores.push(total);
    }
    Ok((scores, oov))
}

pub(crate) fn classify_static_with(
    query: &WeightedKeywordQuery,
    labels: &LabelSet,
    label_vecs: &[EmbeddingVector],
    store: &StaticVectorStore,
) -> Result<ClassificationResult, ClassifyError> {
    if query.is_empty() {
        return Err(ClassifyError::EmptyQuery);
    }
    let entries = query.entries.iter().map(|(k, w)| (k.as_str(), *w as f64));
    let (scores, oov) = weighted_scores(entries, label_vecs, store)?;
    let mut r = ClassificationResult::new(labels, scores, Mode::Static);
    r.diagnostics.oov = oov;
    Ok(r)
}

/// Weighted-keyword classification with static word vectors.
pub fn classify_static(
    query: &WeightedKeywordQuery,
    labels: &LabelSet,
    store: &StaticVectorStore,
) -> Result<ClassificationResult, ClassifyError> {
    let label_vecs = embed_labels(labels, store)?;
    classify_static_with(query, labels, &label_vecs, store)
}

pub(crate) fn static_baseline_unit_with(
    raw_text: &str,
    labels: &LabelSet,
    label_vecs: &[EmbeddingVector],
    store: &StaticVectorStore,
) -> Result<ClassificationResult, ClassifyError> {
    let words: Vec<&str> = category_words(raw_text).collect();
    if words.is_empty() {
        return Err(ClassifyError::EmptyQuery);
    }
    let (scores, oov) = weighted_scores(words.into_iter().map(|w| (w, 1.0)), label_vecs, store)?;
    let mut r = ClassificationResult::new(labels, scores, Mode::BaselineStatic);
    r.diagnostics.oov = oov;
    Ok(r)
}

/// Baseline: every word of the raw text as a keyword with weight 1.
pub fn classify_static_baseline(
    raw_text: &str,
    labels: &LabelSet,
    store: &StaticVectorStore,
) -> Result<ClassificationResult, ClassifyError> {
    let label_vecs = embed_labels(labels, store)?;
    static_baseline_unit_with(raw_text, labels, &label_vecs, store)
}

pub(crate) fn static_baseline_avg_with(
    raw_text: &str,
    labels: &LabelSet,
    label_vecs: &[EmbeddingVector],
    store: &StaticVectorStore,
) -> Result<ClassificationResult, ClassifyError> {
    let words: Vec<&str> = category_words(raw_text).collect();
    if words.is_empty() {
        return Err(ClassifyError::EmptyQuery);
    }
    let (mean, oov) = store.mean_of(words);
    let mean = match mean {
        Some(m) if m.norm() > 0.0 => m,
        _ => return Err(ClassifyError::NoEmbeddableKeywords),
    };
    let scores = contextual_scores(&mean, label_vecs)?;
    let mut r = ClassificationResult::new(labels, scores, Mode::BaselineStatic);
    r.diagnostics.oov = oov;
    Ok(r)
}

/// Baseline: cosine between the mean vector of the raw text's words and each label.
pub fn classify_static_baseline_avg(
    raw_text: &str,
    labels: &LabelSet,
    store: &StaticVectorStore,
) -> Result<ClassificationResult, ClassifyError> {
    let label_vecs = embed_labels(labels, store)?;
    static_baseline_avg_with(raw_text, labels, &label_vecs, store)
}
