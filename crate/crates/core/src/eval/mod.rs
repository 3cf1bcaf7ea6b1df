//! Accuracy evaluation, report comparison and top-k sweeps.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classify::{LabelSet, Mode, Pipeline};
use crate::reformulate::RawQuery;

pub const DEFAULT_RUNS: usize = 3;
pub const DEFAULT_KS: [usize; 5] = [5, 10, 25, 50, 100];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}, line {line}: {reason}")]
    Dataset { path: String, line: usize, reason: String },
    #[error("{0}: dataset has no examples")]
    EmptyDataset(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Contract(String),
    #[error("deterministic configuration gave different accuracies across runs: {0:?}")]
    Nondeterministic(Vec<f64>),
    #[error("reports are not comparable: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub gold: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub examples: Vec<LabeledExample>,
    /// Blank lines skipped while loading.
    pub blank_lines: usize,
}

/// Reads a `text<TAB>gold` file. `#` lines and blank lines are skipped.
/// The dataset is named after the file stem.
pub fn load_dataset(path: &Path, labels: &LabelSet) -> Result<Dataset, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_dataset(&text, &name, &path.display().to_string(), labels)
}

pub fn parse_dataset(text: &str, name: &str, origin: &str, labels: &LabelSet) -> Result<Dataset, EvalError> {
    let err = |line: usize, reason: String| EvalError::Dataset {
        path: origin.to_string(),
        line,
        reason,
    };
    let mut examples = Vec::new();
    let mut blank_lines = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            blank_lines += 1;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let Some((text, gold)) = line.rsplit_once('\t') else {
            return Err(err(line_no, "expected text<TAB>label".into()));
        };
        let gold = gold.trim();
        if !labels.contains(gold) {
            return Err(err(line_no, format!("label {gold:?} is not in the label set")));
        }
        if text.trim().is_empty() {
            return Err(err(line_no, "empty text".into()));
        }
        examples.push(LabeledExample {
            text: text.to_string(),
            gold: gold.to_string(),
        });
    }
    if examples.is_empty() {
        return Err(EvalError::EmptyDataset(origin.to_string()));
    }
    if blank_lines > 0 {
        log::info!("{origin}: skipped {blank_lines} blank lines");
    }
    log::info!("{origin}: {} examples", examples.len());
    Ok(Dataset {
        name: name.to_string(),
        examples,
        blank_lines,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCount {
    pub label: String,
    pub correct: usize,
    pub total: usize,
}

/// An example whose pipeline run failed; it counts as incorrect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleFailure {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_name: String,
    pub mode: Mode,
    /// Accuracy of the first run.
    pub accuracy: f64,
    pub n: usize,
    /// In label-set order.
    pub per_label: Vec<LabelCount>,
    pub config_fingerprint: String,
    pub runs: usize,
    pub run_accuracies: Vec<f64>,
    pub accuracy_mean_over_runs: f64,
    /// Population variance of `run_accuracies`.
    pub variance: f64,
    /// Examples answered by the baseline because reformulation came up empty.
    pub fallbacks: usize,
    pub failures: Vec<ExampleFailure>,
}

/// SHA-256 of a settings string.
pub fn fingerprint(settings: &str) -> String {
    hex::encode(Sha256::digest(settings.as_bytes()))
}

struct Outcome {
    correct: bool,
    fallback: bool,
    error: Option<String>,
}

fn run_once(examples: &[LabeledExample], pipeline: &Pipeline) -> Vec<Outcome> {
    let configured = pipeline.mode();
    examples
        .par_iter()
        .map(|ex| {
            let r = RawQuery::new(ex.text.as_str())
                .map_err(|e| e.to_string())
                .and_then(|q| pipeline.run(&q).map_err(|e| e.to_string()));
            match r {
                Ok(r) => Outcome {
                    correct: r.predicted == ex.gold,
                    fallback: r.mode != configured,
                    error: None,
                },
                Err(e) => Outcome {
                    correct: false,
                    fallback: false,
                    error: Some(e),
                },
            }
        })
        .collect()
}

/// Exact when all values are equal, so identical runs report zero variance.
fn mean(xs: &[f64]) -> f64 {
    if xs.iter().all(|&x| x == xs[0]) {
        return xs[0];
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs `pipeline` over every example `runs` times.
///
/// Failed examples count as incorrect and are listed. For a deterministic
/// pipeline every run must give the same accuracy; anything else is an error.
pub fn evaluate(dataset: &Dataset, pipeline: &Pipeline, runs: usize) -> Result<EvalReport, EvalError> {
    if runs == 0 {
        return Err(EvalError::Contract("runs must be >= 1".into()));
    }
    let examples = &dataset.examples;
    if examples.is_empty() {
        return Err(EvalError::EmptyDataset(dataset.name.clone()));
    }
    let labels = pipeline.labels();
    if let Some(bad) = examples.iter().find(|e| !labels.contains(&e.gold)) {
        return Err(EvalError::Contract(format!("gold label {:?} is not in the label set", bad.gold)));
    }

    let n = examples.len();
    let mut run_accuracies = Vec::with_capacity(runs);
    let mut first: Option<Vec<Outcome>> = None;
    for _ in 0..runs {
        let outcomes = run_once(examples, pipeline);
        let correct = outcomes.iter().filter(|o| o.correct).count();
        run_accuracies.push(correct as f64 / n as f64);
        first.get_or_insert(outcomes);
    }
    let outcomes = first.expect("runs >= 1");

    if pipeline.is_deterministic() && run_accuracies.iter().any(|&a| a != run_accuracies[0]) {
        return Err(EvalError::Nondeterministic(run_accuracies));
    }

    let mut per_label: Vec<LabelCount> = labels
        .labels()
        .iter()
        .map(|l| LabelCount {
            label: l.clone(),
            correct: 0,
            total: 0,
        })
        .collect();
    for (ex, o) in examples.iter().zip(&outcomes) {
        let slot = &mut per_label[labels.position(&ex.gold).expect("validated above")];
        slot.total += 1;
        slot.correct += o.correct as usize;
    }
    let failures = outcomes
        .iter()
        .enumerate()
        .filter_map(|(index, o)| {
            o.error.as_ref().map(|e| ExampleFailure {
                index,
                error: e.clone(),
            })
        })
        .collect::<Vec<_>>();
    for f in &failures {
        log::warn!("example {}: {}", f.index, f.error);
    }

    let m = mean(&run_accuracies);
    let variance = run_accuracies.iter().map(|a| (a - m).powi(2)).sum::<f64>() / runs as f64;
    Ok(EvalReport {
        dataset_name: dataset.name.clone(),
        mode: pipeline.mode(),
        accuracy: run_accuracies[0],
        n,
        per_label,
        config_fingerprint: fingerprint(&pipeline.describe()),
        runs,
        run_accuracies,
        accuracy_mean_over_runs: m,
        variance,
        fallbacks: outcomes.iter().filter(|o| o.fallback).count(),
        failures,
    })
}

/// `value` with two decimals, sign always shown, and no negative zero.
fn signed(value: f64) -> String {
    let s = format!("{value:+.2}");
    if s == "-0.00" {
        "+0.00".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset_name: String,
    pub n: usize,
    pub base_mode: Mode,
    pub base_percent: f64,
    pub other_mode: Mode,
    pub other_percent: f64,
    /// Percentage points, `other - base`.
    pub delta: f64,
}

impl Comparison {
    /// Base accuracy followed by the signed delta, e.g. `46.37 +13.00`.
    pub fn render(&self) -> String {
        format!("{:.2} {}", self.base_percent, signed(self.delta))
    }
}

/// Percentage-point difference of `other` over `base`, using mean accuracies.
pub fn compare(base: &EvalReport, other: &EvalReport) -> Result<Comparison, EvalError> {
    if base.dataset_name != other.dataset_name {
        return Err(EvalError::Mismatch(format!(
            "datasets {:?} and {:?}",
            base.dataset_name, other.dataset_name
        )));
    }
    if base.n != other.n {
        return Err(EvalError::Mismatch(format!("sizes {} and {}", base.n, other.n)));
    }
    let base_percent = base.accuracy_mean_over_runs * 100.0;
    let other_percent = other.accuracy_mean_over_runs * 100.0;
    Ok(Comparison {
        dataset_name: base.dataset_name.clone(),
        n: base.n,
        base_mode: base.mode,
        base_percent,
        other_mode: other.mode,
        other_percent,
        delta: other_percent - base_percent,
    })
}

/// A table with the base accuracy and one delta column per other report.
pub fn render_comparisons(base: &EvalReport, others: &[&EvalReport]) -> Result<String, EvalError> {
    let cmps = others.iter().map(|o| compare(base, o)).collect::<Result<Vec<_>, _>>()?;
    let mut header = format!("dataset\t{}", mode_name(base.mode));
    let mut row = format!("{}\t{:.2}", base.dataset_name, base.accuracy_mean_over_runs * 100.0);
    for c in &cmps {
        let _ = write!(header, "\t{}", mode_name(c.other_mode));
        let _ = write!(row, "\t{}", signed(c.delta));
    }
    Ok(format!("{header}\n{row}\n"))
}

fn mode_name(mode: Mode) -> String {
    serde_json::to_value(mode)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    /// `None` when the evaluation at this k failed.
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset_name: String,
    pub mode: Mode,
    pub points: Vec<SweepPoint>,
    /// Fingerprint of every setting except `top_k`.
    pub config_fingerprint: String,
    pub runs: usize,
}

impl SweepReport {
    /// Two tab-separated columns, `k` and accuracy; failed points show `NA`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("k\taccuracy\n");
        for p in &self.points {
            match p.accuracy {
                Some(a) => {
                    let _ = writeln!(out, "{}\t{a}", p.k);
                }
                None => {
                    let _ = writeln!(out, "{}\tNA", p.k);
                }
            }
        }
        out
    }
}

/// One full evaluation per `k`, all other settings fixed. A failing `k` is
/// recorded and the sweep moves on.
pub fn sweep_k(dataset: &Dataset, pipeline: &Pipeline, ks: &[usize], runs: usize) -> Result<SweepReport, EvalError> {
    if ks.is_empty() {
        return Err(EvalError::Contract("no k values given".into()));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) || ks[0] == 0 {
        return Err(EvalError::Contract("k values must be positive and strictly increasing".into()));
    }
    let points = ks
        .iter()
        .map(|&k| {
            let r = pipeline
                .with_top_k(k)
                .map_err(|e| e.to_string())
                .and_then(|p| evaluate(dataset, &p, runs).map_err(|e| e.to_string()));
            match r {
                Ok(rep) => SweepPoint {
                    k,
                    accuracy: Some(rep.accuracy_mean_over_runs),
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep at k={k} failed: {e}");
                    SweepPoint {
                        k,
                        accuracy: None,
                        error: Some(e),
                    }
                }
            }
        })
        .collect();
    Ok(SweepReport {
        dataset_name: dataset.name.clone(),
        mode: pipeline.mode(),
        points,
        config_fingerprint: fingerprint(&pipeline.describe_except_top_k()),
        runs,
    })
}
