//! Retrieval-augmented query reformulation for zero-shot text classification.
//!
//! A short input is matched against a categorized article corpus with BM25;
//! the categories of the top articles replace the input, either as one
//! concatenated sentence or as weighted keywords, and the result is compared
//! with label embeddings.

pub mod classify;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod reformulate;
pub mod retrieval;
pub mod stopwords;
pub mod tokenizer;

pub use classify::{
    ClassificationResult, ClassifyError, LabelSet, Mode, Pipeline, PipelineError, PipelineOptions, Provider,
    QueryForm, ScoreTable, StaticBaseline, Variant,
};
pub use corpus::{CorpusError, Document};
pub use eval::{Dataset, EvalError, EvalReport, LabeledExample, SweepReport};
pub use embeddings::{EmbeddingError, EmbeddingVector, SentenceEmbedder, StaticVectorStore};
pub use reformulate::{
    ExtractorConfig, RawQuery, ReformulateError, SentenceQuery, Strategy, WeightedKeywordQuery,
};
pub use retrieval::{AnalysisConfig, Bm25Params, Bm25Retriever, InvertedIndex, RankedArticle, RetrievalError, Retriever};
pub use tokenizer::{Gpt2Tokenizer, Tokenizer, TokenizerError, WhitespaceTokenizer};
