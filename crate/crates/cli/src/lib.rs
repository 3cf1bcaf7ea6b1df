//! Command implementations behind the `qzero` binary.
//!
//! Every command writes JSON lines (or, with `--pretty`, plain tables) to the
//! given writer, or to `--output` when set, so tests can drive them in-process.

pub mod args;
mod render;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use qzero_core::classify::{LabelSet, Pipeline, PipelineOptions, Provider, QueryForm, StaticBaseline, Variant};
use qzero_core::corpus::{ingest_all, CorpusStats};
use qzero_core::embeddings::{
    load_static_vectors, RemoteEmbedder, RemoteEmbedderConfig, StaticVectorStore, AUTH_TOKEN_ENV,
};
use qzero_core::eval::{self, EvalReport};
use qzero_core::reformulate::{
    make_keyword_query, make_sentence_query, retrieve_categories, ExternalCommand, ExtractorConfig, RawQuery,
    Strategy,
};
use qzero_core::retrieval::{build_index, persist, AnalysisConfig, Bm25Params, Bm25Retriever, RankedArticle};
use qzero_core::tokenizer::{Gpt2Tokenizer, Tokenizer, WhitespaceTokenizer};

pub use args::{Cli, Command, ProviderSpec};
use args::*;

/// Runs a parsed command line, writing primary output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Index(a) => cmd_index(&a, out),
        Command::Retrieve(a) => cmd_retrieve(&a, out),
        Command::Reformulate(a) => cmd_reformulate(&a, out),
        Command::Classify(a) => cmd_classify(&a, false, out),
        Command::Explain(a) => cmd_classify(&a, true, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
    }
}

/// Parses `argv` (including the program name) and runs it.
pub fn run_args<I, S>(argv: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = Cli::try_parse_from(argv)?;
    run(cli, out)
}

/// Collects output and sends it to `--output` or the caller's writer.
struct Sink<'a> {
    buf: Vec<u8>,
    out: &'a mut dyn Write,
    path: Option<PathBuf>,
}

impl<'a> Sink<'a> {
    fn new(args: &OutputArgs, out: &'a mut dyn Write) -> Self {
        Sink {
            buf: Vec::new(),
            out,
            path: args.output.clone(),
        }
    }

    fn json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.buf, value)?;
        self.buf.push(b'\n');
        Ok(())
    }

    fn text(&mut self, s: &str) {
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn finish(self) -> Result<()> {
        match &self.path {
            Some(p) => std::fs::write(p, &self.buf).with_context(|| format!("writing {}", p.display())),
            None => {
                self.out.write_all(&self.buf)?;
                Ok(self.out.flush()?)
            }
        }
    }
}

#[derive(Serialize)]
struct IndexSummary<'a> {
    index: &'a Path,
    stats: CorpusStats,
    manifest: persist::Manifest,
}

pub fn cmd_index(a: &IndexArgs, out: &mut dyn Write) -> Result<()> {
    let file = File::open(&a.corpus).with_context(|| format!("opening corpus {}", a.corpus.display()))?;
    let (docs, stats) = ingest_all(BufReader::new(file)).context("reading corpus")?;
    log::info!("corpus: {stats:?}");
    let analysis = AnalysisConfig {
        remove_stopwords: !a.keep_stopwords,
        stem: a.stem,
    };
    let defaults = Bm25Params::default();
    let params = Bm25Params {
        k1: a.k1.unwrap_or(defaults.k1),
        b: a.b.unwrap_or(defaults.b),
    };
    let index = build_index(docs, analysis, params).context("building index")?;
    let manifest = persist::save(&index, &a.index).with_context(|| format!("writing index {}", a.index.display()))?;

    let mut sink = Sink::new(&a.output, out);
    if a.output.pretty {
        sink.text(&render::index_summary(&a.index, &stats, &manifest));
    } else {
        sink.json(&IndexSummary {
            index: &a.index,
            stats,
            manifest,
        })?;
    }
    sink.finish()
}

fn open_retriever(a: &RetrievalArgs) -> Result<Bm25Retriever> {
    let Some(dir) = &a.index else {
        bail!("--index is required");
    };
    let index = persist::load(dir).with_context(|| format!("opening index {}", dir.display()))?;
    let stored = index.default_params();
    let params = Bm25Params {
        k1: a.k1.unwrap_or(stored.k1),
        b: a.b.unwrap_or(stored.b),
    };
    Ok(Bm25Retriever::new(Arc::new(index), params)?)
}

#[derive(Serialize)]
struct RetrieveRecord<'a> {
    query: &'a str,
    articles: Vec<RankedArticle>,
}

pub fn cmd_retrieve(a: &RetrieveArgs, out: &mut dyn Write) -> Result<()> {
    let retriever = open_retriever(&a.retrieval)?;
    let queries = a.queries.collect()?;
    let mut sink = Sink::new(&a.output, out);
    for q in &queries {
        let raw = RawQuery::new(q.as_str())?;
        let articles = retrieve_categories(&raw, &retriever, a.retrieval.top_k)?;
        if a.output.pretty {
            sink.text(&render::articles(q, &articles));
        } else {
            sink.json(&RetrieveRecord { query: q, articles })?;
        }
    }
    sink.finish()
}

fn extractor(a: &ReformArgs) -> Result<ExtractorConfig> {
    let strategy = match a.extractor {
        ExtractorArg::Capitalization => Strategy::Capitalization,
        ExtractorArg::Nounlite => Strategy::NounLite,
        ExtractorArg::External => {
            let Some((program, args)) = a.extractor_cmd.split_first() else {
                bail!("--extractor external needs --extractor-cmd");
            };
            Strategy::External(ExternalCommand {
                program: program.clone(),
                args: args.to_vec(),
            })
        }
    };
    Ok(ExtractorConfig::new(strategy))
}

fn tokenizer(a: &ReformArgs) -> Result<Box<dyn Tokenizer>> {
    if a.whitespace_tokenizer {
        log::warn!("counting whitespace words; the token budget is not enforced in GPT-2 tokens");
        return Ok(Box::new(WhitespaceTokenizer));
    }
    let t = Gpt2Tokenizer::from_dir(&a.tokenizer).with_context(|| {
        format!(
            "loading GPT-2 tokenizer from {} (pass --tokenizer DIR or --whitespace-tokenizer)",
            a.tokenizer.display()
        )
    })?;
    Ok(Box::new(t))
}

#[derive(Serialize)]
#[serde(tag = "form", rename_all = "lowercase")]
enum ReformulationRecord<'a> {
    Sentence {
        query: &'a str,
        text: String,
        token_count: usize,
        tokenizer: String,
        source_ranks: Vec<usize>,
    },
    Keywords {
        query: &'a str,
        keywords: Vec<(String, u64)>,
    },
}

pub fn cmd_reformulate(a: &ReformulateArgs, out: &mut dyn Write) -> Result<()> {
    let retriever = open_retriever(&a.retrieval)?;
    let queries = a.queries.collect()?;
    let extractor = extractor(&a.reform)?;
    let tokenizer = match a.reform.mode {
        ModeArg::Sentence => Some(tokenizer(&a.reform)?),
        ModeArg::Keywords => None,
    };
    let mut sink = Sink::new(&a.output, out);
    for q in &queries {
        let raw = RawQuery::new(q.as_str())?;
        let articles = retrieve_categories(&raw, &retriever, a.retrieval.top_k)?;
        let record = match &tokenizer {
            Some(t) => {
                let s = make_sentence_query(&articles, t.as_ref(), a.reform.token_budget)?;
                ReformulationRecord::Sentence {
                    query: q,
                    text: s.text,
                    token_count: s.token_count,
                    tokenizer: t.name().to_string(),
                    source_ranks: s.source_ranks,
                }
            }
            None => ReformulationRecord::Keywords {
                query: q,
                keywords: make_keyword_query(&articles, &extractor)?.entries,
            },
        };
        if a.output.pretty {
            sink.text(&render::reformulation(&record_json(&record)?));
        } else {
            sink.json(&record)?;
        }
    }
    sink.finish()
}

fn record_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

/// Everything a [`Pipeline`] borrows, loaded once per command.
struct Resources {
    labels: LabelSet,
    retriever: Option<Bm25Retriever>,
    tokenizer: Option<Box<dyn Tokenizer>>,
    store: Option<StaticVectorStore>,
    remote: Option<RemoteEmbedder>,
    extractor: ExtractorConfig,
    form: QueryForm,
    options: PipelineOptions,
}

impl Resources {
    fn load(r: &RetrievalArgs, f: &ReformArgs, p: &ProviderArgs, variant: Variant, explain: bool) -> Result<Self> {
        let labels = LabelSet::from_file(&p.labels)?;
        let spec: ProviderSpec = p.provider.parse()?;
        let form = match f.mode {
            ModeArg::Sentence => QueryForm::Sentence,
            ModeArg::Keywords => QueryForm::Keywords,
        };
        let (store, remote) = match spec {
            ProviderSpec::Static(path) => {
                let s = load_static_vectors(&path).with_context(|| format!("loading vectors {}", path.display()))?;
                (Some(s), None)
            }
            ProviderSpec::Remote { url, model } => {
                let mut cfg = RemoteEmbedderConfig::new(url, model);
                cfg.auth_token = std::env::var(AUTH_TOKEN_ENV).ok().filter(|t| !t.is_empty());
                cfg.max_in_flight = p.max_in_flight;
                cfg.batch_size = p.batch_size;
                cfg.timeout = Duration::from_secs(p.timeout_secs);
                (None, Some(RemoteEmbedder::new(cfg)?))
            }
        };
        let needs_retrieval = variant == Variant::QZero || explain;
        let retriever = if needs_retrieval || r.index.is_some() {
            Some(open_retriever(r)?)
        } else {
            None
        };
        let tokenizer = if form == QueryForm::Sentence && variant == Variant::QZero {
            Some(tokenizer(f)?)
        } else {
            None
        };
        let options = PipelineOptions {
            top_k: r.top_k,
            token_budget: f.token_budget,
            explain,
            static_baseline: match p.static_baseline {
                StaticBaselineArg::Average => StaticBaseline::Average,
                StaticBaselineArg::UnitWeights => StaticBaseline::UnitWeights,
            },
        };
        Ok(Resources {
            labels,
            retriever,
            tokenizer,
            store,
            remote,
            extractor: extractor(f)?,
            form,
            options,
        })
    }

    fn pipeline(&self, variant: Variant) -> Result<Pipeline<'_>> {
        let provider = match (&self.store, &self.remote) {
            (Some(s), _) => Provider::Static(s),
            (None, Some(e)) => Provider::Contextual(e),
            (None, None) => unreachable!("one provider is always loaded"),
        };
        let retriever = self.retriever.as_ref().map(|r| r as &dyn qzero_core::retrieval::Retriever);
        Ok(Pipeline::new(
            self.labels.clone(),
            self.form,
            variant,
            provider,
            retriever,
            self.tokenizer.as_deref(),
            self.extractor.clone(),
            self.options,
        )?)
    }
}

#[derive(Serialize)]
struct ClassifyRecord<'a> {
    query: &'a str,
    #[serde(flatten)]
    result: qzero_core::ClassificationResult,
}

pub fn cmd_classify(a: &ClassifyArgs, explain: bool, out: &mut dyn Write) -> Result<()> {
    let variant = if a.provider.baseline { Variant::Baseline } else { Variant::QZero };
    let res = Resources::load(&a.retrieval, &a.reform, &a.provider, variant, explain)?;
    let pipeline = res.pipeline(variant)?;
    let queries = a.queries.collect()?;
    let mut sink = Sink::new(&a.output, out);
    for q in &queries {
        let raw = RawQuery::new(q.as_str())?;
        let mut result = pipeline.run(&raw)?;
        if explain && result.explain.is_none() {
            // the baseline does not retrieve; show what QZero would have seen
            let articles = retrieve_categories(&raw, res.retriever.as_ref().expect("loaded for explain"), a.retrieval.top_k)?;
            result.explain = Some(explain_payload(&articles, &res.extractor));
        }
        if a.output.pretty {
            sink.text(&render::classification(q, &result));
        } else {
            sink.json(&ClassifyRecord { query: q, result })?;
        }
    }
    sink.finish()
}

fn explain_payload(articles: &[RankedArticle], extractor: &ExtractorConfig) -> qzero_core::classify::Explain {
    use qzero_core::classify::{EXPLAIN_CATEGORIES, EXPLAIN_KEYWORDS};
    let cats: Vec<&str> = qzero_core::reformulate::ranked_categories(articles)
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    let mut keywords = qzero_core::reformulate::extract_keywords(&cats, extractor).unwrap_or_default();
    keywords.truncate(EXPLAIN_KEYWORDS);
    qzero_core::classify::Explain {
        categories: cats.iter().take(EXPLAIN_CATEGORIES).map(|c| c.to_string()).collect(),
        keywords,
    }
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let variant = if a.provider.baseline { Variant::Baseline } else { Variant::QZero };
    let needs_index = a.compare_baseline || variant == Variant::QZero;
    let res = Resources::load(&a.retrieval, &a.reform, &a.provider, variant, false)?;
    if needs_index && res.retriever.is_none() {
        bail!("--index is required");
    }
    let dataset = eval::load_dataset(&a.dataset, &res.labels)?;
    let report = eval::evaluate(&dataset, &res.pipeline(variant)?, a.runs)?;
    let mut reports: Vec<EvalReport> = vec![report];
    if a.compare_baseline && variant == Variant::QZero {
        let base = eval::evaluate(&dataset, &res.pipeline(Variant::Baseline)?, a.runs)?;
        reports.insert(0, base);
    }

    let mut sink = Sink::new(&a.output, out);
    for r in &reports {
        if a.output.pretty {
            sink.text(&render::eval_report(r));
        } else {
            sink.json(r)?;
        }
    }
    if reports.len() == 2 {
        let cmp = eval::compare(&reports[0], &reports[1])?;
        if a.output.pretty {
            sink.text(&eval::render_comparisons(&reports[0], &[&reports[1]])?);
        } else {
            sink.json(&cmp)?;
        }
    }
    sink.finish()
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let res = Resources::load(&a.retrieval, &a.reform, &a.provider, Variant::QZero, false)?;
    let dataset = eval::load_dataset(&a.dataset, &res.labels)?;
    let report = eval::sweep_k(&dataset, &res.pipeline(Variant::QZero)?, &a.ks, a.runs)?;
    if let Some(path) = &a.output.output {
        let tsv = path.with_extension("tsv");
        if tsv == *path {
            bail!("--output must not end in .tsv; the k/accuracy table is written there");
        }
        std::fs::write(&tsv, report.to_tsv()).with_context(|| format!("writing {}", tsv.display()))?;
    }
    let mut sink = Sink::new(&a.output, out);
    if a.output.pretty {
        sink.text(&report.to_tsv());
    } else {
        sink.json(&report)?;
    }
    sink.finish()
}
