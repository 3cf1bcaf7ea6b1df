use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qzero", version, about = "Retrieval-augmented query reformulation for zero-shot classification")]
pub struct Cli {
    /// Worker threads for per-example parallelism (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a BM25 index from a JSON-lines corpus.
    Index(IndexArgs),
    /// Show the top-k articles for queries.
    Retrieve(RetrieveArgs),
    /// Show the reformulated query.
    Reformulate(ReformulateArgs),
    /// Predict a label for each query.
    Classify(ClassifyArgs),
    /// Predict and show the retrieved categories and top keywords.
    Explain(ClassifyArgs),
    /// Accuracy on a labeled dataset.
    Eval(EvalArgs),
    /// Accuracy as a function of the number of retrieved articles. With
    /// --output, a `k<TAB>accuracy` table is also written next to the report
    /// with a `.tsv` extension.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Corpus file, one JSON record per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output index directory.
    #[arg(long)]
    pub index: PathBuf,
    /// Keep stopwords in the index.
    #[arg(long)]
    pub keep_stopwords: bool,
    /// Apply English stemming.
    #[arg(long)]
    pub stem: bool,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    /// Write results here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Human-readable tables instead of JSON lines.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args, Clone)]
pub struct QueryArgs {
    /// Query text; repeatable.
    #[arg(long = "query", short = 'q')]
    pub queries: Vec<String>,
    /// File with one query per line.
    #[arg(long = "queries")]
    pub queries_file: Option<PathBuf>,
}

impl QueryArgs {
    pub fn collect(&self) -> anyhow::Result<Vec<String>> {
        let mut out = self.queries.clone();
        if let Some(path) = &self.queries_file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            out.extend(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string));
        }
        if out.is_empty() {
            bail!("no queries given (use --query or --queries)");
        }
        Ok(out)
    }
}

#[derive(Debug, Args, Clone)]
pub struct RetrievalArgs {
    /// Index directory built by `qzero index`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Articles retrieved per query.
    #[arg(long, default_value_t = qzero_core::retrieval::DEFAULT_TOP_K)]
    pub top_k: usize,
    /// BM25 k1 (default: the value stored with the index).
    #[arg(long)]
    pub k1: Option<f64>,
    /// BM25 b (default: the value stored with the index).
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Concatenated categories for a sentence embedder.
    Sentence,
    /// Weighted keywords for static word vectors.
    Keywords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtractorArg {
    Capitalization,
    Nounlite,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StaticBaselineArg {
    Average,
    UnitWeights,
}

#[derive(Debug, Args, Clone)]
pub struct ReformArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Keywords)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = ExtractorArg::Nounlite)]
    pub extractor: ExtractorArg,
    /// Program (and arguments) for `--extractor external`.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    pub extractor_cmd: Vec<String>,
    /// Directory holding the GPT-2 `vocab.json` and `merges.txt`.
    #[arg(long, default_value = "assets/gpt2")]
    pub tokenizer: PathBuf,
    /// Count whitespace-separated words instead of GPT-2 tokens.
    #[arg(long)]
    pub whitespace_tokenizer: bool,
    #[arg(long, default_value_t = qzero_core::reformulate::DEFAULT_TOKEN_BUDGET)]
    pub token_budget: usize,
}

#[derive(Debug, Args, Clone)]
pub struct ProviderArgs {
    /// `static:<vectors file>` or `remote:<base url>,<model>`. The bearer
    /// token for remote providers is read from QZERO_EMBEDDINGS_TOKEN.
    #[arg(long)]
    pub provider: String,
    /// Label file, one label per line; order breaks ties.
    #[arg(long)]
    pub labels: PathBuf,
    /// Classify the raw text without reformulation.
    #[arg(long)]
    pub baseline: bool,
    /// Baseline flavor for static vectors.
    #[arg(long, value_enum, default_value_t = StaticBaselineArg::Average)]
    pub static_baseline: StaticBaselineArg,
    /// Concurrent requests to a remote provider.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    /// Texts per remote request.
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Remote request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub queries: QueryArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReformulateArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub reform: ReformArgs,
    #[command(flatten)]
    pub queries: QueryArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Clone)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub reform: ReformArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub queries: QueryArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub reform: ReformArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// Dataset file, `text<TAB>label` per line.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = qzero_core::eval::DEFAULT_RUNS)]
    pub runs: usize,
    /// Also evaluate the baseline and print the delta table.
    #[arg(long)]
    pub compare_baseline: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub reform: ReformArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',', default_values_t = qzero_core::eval::DEFAULT_KS)]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parsed `--provider` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Static(PathBuf),
    Remote { url: String, model: String },
}

impl std::str::FromStr for ProviderSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        if let Some(path) = s.strip_prefix("static:") {
            if path.is_empty() {
                bail!("static provider needs a vector file path");
            }
            return Ok(ProviderSpec::Static(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("remote:") {
            let Some((url, model)) = rest.rsplit_once(',') else {
                bail!("remote provider must look like remote:<url>,<model>");
            };
            if url.is_empty() || model.is_empty() {
                bail!("remote provider must look like remote:<url>,<model>");
            }
            return Ok(ProviderSpec::Remote {
                url: url.to_string(),
                model: model.to_string(),
            });
        }
        bail!("unknown provider {s:?}; expected static:<path> or remote:<url>,<model>")
    }
}
