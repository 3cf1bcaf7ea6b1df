//! End-to-end flow: retrieve, reformulate, classify.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    classify_contextual_cached, classify_static_with, embed_labels, static_baseline_avg_with,
    static_baseline_unit_with, ClassificationResult, ClassifyError, Explain, LabelSet, Mode,
    EXPLAIN_CATEGORIES, EXPLAIN_KEYWORDS,
};
use crate::embeddings::{EmbeddingVector, SentenceEmbedder, StaticVectorStore};
use crate::reformulate::{
    extract_keywords, make_keyword_query, make_sentence_query, ranked_categories, retrieve_categories,
    ExtractorConfig, RawQuery, ReformulateError, DEFAULT_TOKEN_BUDGET,
};
use crate::retrieval::{RankedArticle, Retriever, DEFAULT_TOP_K};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Retrieval,
    Reformulation,
    Embedding,
    Classification,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Retrieval => "retrieval",
            Stage::Reformulation => "reformulation",
            Stage::Embedding => "embedding",
            Stage::Classification => "classification",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage} stage: {message}")]
    Stage { stage: Stage, message: String },
    #[error("inconsistent pipeline configuration: {0}")]
    Config(String),
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Stage { stage, .. } => Some(*stage),
            PipelineError::Config(_) => None,
        }
    }
}

fn at(stage: Stage) -> impl Fn(&dyn std::fmt::Display) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

fn from_classify(e: ClassifyError) -> PipelineError {
    match e {
        ClassifyError::Embedding(e) => at(Stage::Embedding)(&e),
        other => at(Stage::Classification)(&other),
    }
}

fn from_reformulate(e: ReformulateError) -> PipelineError {
    match e {
        ReformulateError::Retrieval(e) => at(Stage::Retrieval)(&e),
        other => at(Stage::Reformulation)(&other),
    }
}

/// Which reformulated form feeds the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryForm {
    /// Concatenated categories, sentence embedder.
    Sentence,
    /// Weighted keywords, static word vectors.
    Keywords,
}

/// Reformulate first, or classify the raw text directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    QZero,
    Baseline,
}

/// Static-vector baseline flavor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaticBaseline {
    /// Cosine between the mean word vector of the text and each label.
    #[default]
    Average,
    /// Keyword scoring with every word of the text at weight 1.
    UnitWeights,
}

#[derive(Clone, Copy)]
pub enum Provider<'a> {
    Contextual(&'a dyn SentenceEmbedder),
    Static(&'a StaticVectorStore),
}

impl Provider<'_> {
    fn describe(&self) -> String {
        match self {
            Provider::Contextual(e) => e.describe(),
            Provider::Static(s) => s.describe(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub top_k: usize,
    pub token_budget: usize,
    pub explain: bool,
    pub static_baseline: StaticBaseline,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            top_k: DEFAULT_TOP_K,
            token_budget: DEFAULT_TOKEN_BUDGET,
            explain: false,
            static_baseline: StaticBaseline::Average,
        }
    }
}

/// A configured classifier. Label vectors are computed once and reused.
pub struct Pipeline<'a> {
    labels: LabelSet,
    form: QueryForm,
    variant: Variant,
    provider: Provider<'a>,
    retriever: Option<&'a dyn Retriever>,
    tokenizer: Option<&'a dyn Tokenizer>,
    extractor: ExtractorConfig,
    options: PipelineOptions,
    label_vecs: OnceLock<Result<Vec<EmbeddingVector>, String>>,
}

impl<'a> Pipeline<'a> {
    /// Checks that the provider suits the query form and that QZero has the
    /// parts it needs (a retriever, plus a tokenizer for sentence queries).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        labels: LabelSet,
        form: QueryForm,
        variant: Variant,
        provider: Provider<'a>,
        retriever: Option<&'a dyn Retriever>,
        tokenizer: Option<&'a dyn Tokenizer>,
        extractor: ExtractorConfig,
        options: PipelineOptions,
    ) -> Result<Self, PipelineError> {
        match (form, &provider) {
            (QueryForm::Sentence, Provider::Contextual(_)) | (QueryForm::Keywords, Provider::Static(_)) => {}
            (QueryForm::Sentence, Provider::Static(_)) => {
                return Err(PipelineError::Config(
                    "sentence queries need a sentence (remote) embedder, not static vectors".into(),
                ))
            }
            (QueryForm::Keywords, Provider::Contextual(_)) => {
                return Err(PipelineError::Config("keyword queries need static word vectors".into()))
            }
        }
        if variant == Variant::QZero {
            if retriever.is_none() {
                return Err(PipelineError::Config("a retriever is required".into()));
            }
            if form == QueryForm::Sentence && tokenizer.is_none() {
                return Err(PipelineError::Config("sentence queries need a tokenizer".into()));
            }
        }
        if options.top_k == 0 || options.token_budget == 0 {
            return Err(PipelineError::Config("top_k and token_budget must be >= 1".into()));
        }
        Ok(Pipeline {
            labels,
            form,
            variant,
            provider,
            retriever,
            tokenizer,
            extractor,
            options,
            label_vecs: OnceLock::new(),
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn options(&self) -> PipelineOptions {
        self.options
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn form(&self) -> QueryForm {
        self.form
    }

    /// Same configuration with a different number of retrieved articles.
    pub fn with_top_k(&self, top_k: usize) -> Result<Pipeline<'a>, PipelineError> {
        Pipeline::new(
            self.labels.clone(),
            self.form,
            self.variant,
            self.provider,
            self.retriever,
            self.tokenizer,
            self.extractor.clone(),
            PipelineOptions { top_k, ..self.options },
        )
    }

    /// Only local static vectors are guaranteed to be reproducible.
    pub fn is_deterministic(&self) -> bool {
        match self.provider {
            Provider::Static(_) => true,
            Provider::Contextual(e) => e.is_deterministic(),
        }
    }

    /// The mode a successful (non-fallback) prediction reports.
    pub fn mode(&self) -> Mode {
        match (self.variant, self.provider) {
            (Variant::QZero, Provider::Contextual(_)) => Mode::Contextual,
            (Variant::QZero, Provider::Static(_)) => Mode::Static,
            (Variant::Baseline, Provider::Contextual(_)) => Mode::BaselineContextual,
            (Variant::Baseline, Provider::Static(_)) => Mode::BaselineStatic,
        }
    }

    /// Every setting that can change a prediction, as one string.
    pub fn describe(&self) -> String {
        self.settings(true)
    }

    /// [`Pipeline::describe`] minus `top_k`, for comparing points of a sweep.
    pub fn describe_except_top_k(&self) -> String {
        self.settings(false)
    }

    fn settings(&self, with_top_k: bool) -> String {
        let o = &self.options;
        let top_k = if with_top_k { o.top_k.to_string() } else { "*".into() };
        format!(
            "labels={:?};form={:?};variant={:?};provider={};retriever={};tokenizer={};extractor={};top_k={};budget={};baseline={:?}",
            self.labels.labels(),
            self.form,
            self.variant,
            self.provider.describe(),
            self.retriever.map(|r| r.describe()).unwrap_or_default(),
            self.tokenizer.map(|t| t.name().to_string()).unwrap_or_default(),
            self.extractor.describe(),
            top_k,
            o.token_budget,
            o.static_baseline,
        )
    }

    fn label_vectors(&self) -> Result<&[EmbeddingVector], PipelineError> {
        let cached = self.label_vecs.get_or_init(|| {
            let r = match self.provider {
                Provider::Static(store) => embed_labels(&self.labels, store),
                Provider::Contextual(e) => {
                    let texts: Vec<&str> = self.labels.labels().iter().map(String::as_str).collect();
                    e.embed(&texts).map_err(ClassifyError::from)
                }
            };
            r.map_err(|e| from_classify(e).to_string())
        });
        match cached {
            Ok(v) => Ok(v),
            Err(msg) => Err(PipelineError::Stage {
                stage: Stage::Embedding,
                message: msg.clone(),
            }),
        }
    }

    fn baseline(&self, raw: &RawQuery) -> Result<ClassificationResult, PipelineError> {
        let label_vecs = self.label_vectors()?;
        let text = raw.as_str();
        let mut r = match self.provider {
            Provider::Contextual(e) => classify_contextual_cached(text, &self.labels, label_vecs, e),
            Provider::Static(store) => match self.options.static_baseline {
                StaticBaseline::Average => static_baseline_avg_with(text, &self.labels, label_vecs, store),
                StaticBaseline::UnitWeights => static_baseline_unit_with(text, &self.labels, label_vecs, store),
            },
        }
        .map_err(from_classify)?;
        r.mode = match self.provider {
            Provider::Contextual(_) => Mode::BaselineContextual,
            Provider::Static(_) => Mode::BaselineStatic,
        };
        Ok(r)
    }

    fn explain(&self, articles: &[RankedArticle]) -> (Explain, Option<String>) {
        let cats: Vec<&str> = ranked_categories(articles).into_iter().map(|(_, c)| c).collect();
        let (keywords, note) = match extract_keywords(&cats, &self.extractor) {
            Ok(mut k) => {
                k.truncate(EXPLAIN_KEYWORDS);
                (k, None)
            }
            Err(e) => (Vec::new(), Some(format!("keyword extraction for explain failed: {e}"))),
        };
        let explain = Explain {
            categories: cats.iter().take(EXPLAIN_CATEGORIES).map(|c| c.to_string()).collect(),
            keywords,
        };
        (explain, note)
    }

    /// Runs the configured variant on one query.
    ///
    /// QZero falls back to the matching baseline (and says so in `mode` and
    /// the diagnostics) when reformulation produces nothing to classify:
    /// no articles retrieved, only blank categories, no keywords extracted, or
    /// no keyword with a vector.
    pub fn run(&self, raw: &RawQuery) -> Result<ClassificationResult, PipelineError> {
        if self.variant == Variant::Baseline {
            return self.baseline(raw);
        }
        let retriever = self.retriever.expect("checked in new");
        let articles = retrieve_categories(raw, retriever, self.options.top_k).map_err(from_reformulate)?;

        let attempt: Result<ClassificationResult, String> = match (self.form, self.provider) {
            (QueryForm::Sentence, Provider::Contextual(embedder)) => {
                let tokenizer = self.tokenizer.expect("checked in new");
                let sq = make_sentence_query(&articles, tokenizer, self.options.token_budget)
                    .map_err(from_reformulate)?;
                if sq.is_empty() {
                    Err("no categories retrieved".into())
                } else {
                    let label_vecs = self.label_vectors()?;
                    Ok(classify_contextual_cached(&sq.text, &self.labels, label_vecs, embedder)
                        .map_err(from_classify)?)
                }
            }
            (QueryForm::Keywords, Provider::Static(store)) => {
                if ranked_categories(&articles).is_empty() {
                    Err("no categories retrieved".into())
                } else {
                    match make_keyword_query(&articles, &self.extractor) {
                        Err(ReformulateError::NoKeywords) => Err("no keywords extracted".into()),
                        Err(e) => return Err(from_reformulate(e)),
                        Ok(q) => {
                            let label_vecs = self.label_vectors()?;
                            match classify_static_with(&q, &self.labels, label_vecs, store) {
                                Err(ClassifyError::NoEmbeddableKeywords) => {
                                    Err("no keyword has a vector".into())
                                }
                                other => Ok(other.map_err(from_classify)?),
                            }
                        }
                    }
                }
            }
            _ => unreachable!("form/provider pairing checked in new"),
        };

        let mut result = match attempt {
            Ok(r) => r,
            Err(reason) => {
                let mut r = self.baseline(raw)?;
                r.diagnostics.notes.push(format!("fell back to baseline: {reason}"));
                r
            }
        };
        if self.options.explain {
            let (explain, note) = self.explain(&articles);
            result.explain = Some(explain);
            result.diagnostics.notes.extend(note);
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::embeddings::EmbeddingError;
    use crate::reformulate::Strategy;
    use crate::retrieval::{build_index, AnalysisConfig, Bm25Params, Bm25Retriever};
    use crate::tokenizer::WhitespaceTokenizer;
    use std::sync::{Arc, Mutex};

    fn retriever() -> Bm25Retriever {
        let docs = vec![
            Document {
                doc_id: "d1".into(),
                title: String::new(),
                content: "Zorvath striker scored twice".into(),
                categories: vec!["Football strikers".into(), "Football people".into()],
            },
            Document {
                doc_id: "d2".into(),
                title: String::new(),
                content: "Kelmira bank quarterly profits".into(),
                categories: vec!["Banks".into()],
            },
        ];
        let idx = build_index(docs, AnalysisConfig::default(), Bm25Params::default()).unwrap();
        Bm25Retriever::new(Arc::new(idx), Bm25Params::default()).unwrap()
    }

    fn store() -> StaticVectorStore {
        StaticVectorStore::from_reader(
            "football 1 0\nstrikers 0.9 0.1\npeople 0.5 0.5\nbanks 0 1\nsports 1 0\nbusiness 0 1\nzorvath 0 1\n".as_bytes(),
            "t",
        )
        .unwrap()
    }

    fn labels() -> LabelSet {
        LabelSet::new(["sports", "business"]).unwrap()
    }

    #[test]
    fn static_qzero_uses_categories() {
        let (r, s) = (retriever(), store());
        let p = Pipeline::new(
            labels(),
            QueryForm::Keywords,
            Variant::QZero,
            Provider::Static(&s),
            Some(&r),
            None,
            ExtractorConfig::new(Strategy::NounLite),
            PipelineOptions {
                explain: true,
                ..Default::default()
            },
        )
        .unwrap();
        let res = p.run(&RawQuery::new("Zorvath again").unwrap()).unwrap();
        assert_eq!(res.mode, Mode::Static);
        assert_eq!(res.predicted, "sports");
        let ex = res.explain.unwrap();
        assert_eq!(ex.categories, ["Football strikers", "Football people"]);
        assert_eq!(ex.keywords[0], ("football".to_string(), 2));

        // the raw-text baseline is fooled by the entity vector
        let b = Pipeline::new(
            labels(),
            QueryForm::Keywords,
            Variant::Baseline,
            Provider::Static(&s),
            None,
            None,
            ExtractorConfig::new(Strategy::NounLite),
            PipelineOptions::default(),
        )
        .unwrap();
        assert_eq!(b.run(&RawQuery::new("Zorvath again").unwrap()).unwrap().predicted, "business");
    }

    #[test]
    fn empty_retrieval_falls_back_to_baseline() {
        let (r, s) = (retriever(), store());
        let p = Pipeline::new(
            labels(),
            QueryForm::Keywords,
            Variant::QZero,
            Provider::Static(&s),
            Some(&r),
            None,
            ExtractorConfig::new(Strategy::NounLite),
            PipelineOptions::default(),
        )
        .unwrap();
        let res = p.run(&RawQuery::new("football unrelated").unwrap()).unwrap();
        assert_eq!(res.mode, Mode::BaselineStatic);
        assert!(res.diagnostics.notes[0].contains("fell back"));
    }

    struct Recorder {
        seen: Mutex<Vec<String>>,
    }

    impl SentenceEmbedder for Recorder {
        fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
            self.seen.lock().unwrap().extend(texts.iter().map(|t| t.to_string()));
            texts
                .iter()
                .map(|t| EmbeddingVector::new(vec![t.len() as f32, 1.0]))
                .collect()
        }
        fn describe(&self) -> String {
            "recorder".into()
        }
    }

    #[test]
    fn contextual_sends_sentence_query_and_labels() {
        let r = retriever();
        let e = Recorder {
            seen: Mutex::new(Vec::new()),
        };
        let tok = WhitespaceTokenizer;
        let p = Pipeline::new(
            labels(),
            QueryForm::Sentence,
            Variant::QZero,
            Provider::Contextual(&e),
            Some(&r),
            Some(&tok),
            ExtractorConfig::new(Strategy::NounLite),
            PipelineOptions::default(),
        )
        .unwrap();
        let res = p.run(&RawQuery::new("Zorvath").unwrap()).unwrap();
        assert_eq!(res.mode, Mode::Contextual);
        let seen = e.seen.lock().unwrap().clone();
        assert!(seen.contains(&"sports".to_string()));
        assert!(seen.contains(&"business".to_string()));
        assert!(seen.contains(&"Football strikers Football people".to_string()));
    }

    #[test]
    fn mismatched_provider_rejected() {
        let s = store();
        let r = retriever();
        assert!(matches!(
            Pipeline::new(
                labels(),
                QueryForm::Sentence,
                Variant::QZero,
                Provider::Static(&s),
                Some(&r),
                None,
                ExtractorConfig::new(Strategy::NounLite),
                PipelineOptions::default(),
            ),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn label_failure_has_stage() {
        let (r, s) = (retriever(), store());
        let p = Pipeline::new(
            LabelSet::new(["sports", "weather"]).unwrap(),
            QueryForm::Keywords,
            Variant::QZero,
            Provider::Static(&s),
            Some(&r),
            None,
            ExtractorConfig::new(Strategy::NounLite),
            PipelineOptions::default(),
        )
        .unwrap();
        let e = p.run(&RawQuery::new("Zorvath").unwrap()).unwrap_err();
        assert_eq!(e.stage(), Some(Stage::Embedding));
    }
}
