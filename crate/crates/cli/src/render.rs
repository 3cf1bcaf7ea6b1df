//! Plain-text tables for `--pretty`.

use std::fmt::Write;
use std::path::Path;

use qzero_core::classify::ClassificationResult;
use qzero_core::corpus::CorpusStats;
use qzero_core::eval::EvalReport;
use qzero_core::retrieval::persist::Manifest;
use qzero_core::retrieval::RankedArticle;

pub fn index_summary(dir: &Path, stats: &CorpusStats, m: &Manifest) -> String {
    format!(
        "index      {}\nread       {}\nkept       {}\nshort      {}\nno-cat     {}\nmalformed  {}\nterms      {}\navgdl      {:.2}\n",
        dir.display(),
        stats.total_read,
        stats.kept,
        stats.dropped_short,
        stats.dropped_no_category,
        stats.malformed,
        m.num_terms,
        m.avgdl
    )
}

pub fn articles(query: &str, articles: &[RankedArticle]) -> String {
    let mut s = format!("query: {query}\n");
    for a in articles {
        let _ = writeln!(s, "{:>4}  {:<16} {:>8.4}  {}", a.rank, a.doc_id, a.score, a.categories.join(" | "));
    }
    s
}

pub fn reformulation(record: &serde_json::Value) -> String {
    let query = record["query"].as_str().unwrap_or_default();
    let mut s = format!("query: {query}\n");
    if let Some(text) = record.get("text").and_then(|t| t.as_str()) {
        let _ = writeln!(s, "tokens: {}\n{text}", record["token_count"]);
    } else if let Some(kws) = record.get("keywords").and_then(|k| k.as_array()) {
        for kw in kws {
            let _ = writeln!(s, "{:>6}  {}", kw[1], kw[0].as_str().unwrap_or_default());
        }
    }
    s
}

pub fn classification(query: &str, r: &ClassificationResult) -> String {
    let mut s = format!("query: {query}\npredicted: {}\n", r.predicted);
    for (label, score) in &r.table.scores {
        let _ = writeln!(s, "  {score:>12.6}  {label}");
    }
    if let Some(ex) = &r.explain {
        s.push_str("returned categories:\n");
        for c in &ex.categories {
            let _ = writeln!(s, "  {c}");
        }
        s.push_str("top keywords:\n");
        for (k, n) in &ex.keywords {
            let _ = writeln!(s, "  {k} ({n})");
        }
    }
    for note in &r.diagnostics.notes {
        let _ = writeln!(s, "note: {note}");
    }
    s
}

pub fn eval_report(r: &EvalReport) -> String {
    let mode = serde_json::to_value(r.mode).unwrap_or_default();
    let mut s = format!(
        "dataset {}  mode {}  n {}  accuracy {:.2}%  (mean of {} runs {:.2}%, variance {})\n",
        r.dataset_name,
        mode.as_str().unwrap_or_default(),
        r.n,
        r.accuracy * 100.0,
        r.runs,
        r.accuracy_mean_over_runs * 100.0,
        r.variance
    );
    for c in &r.per_label {
        let _ = writeln!(s, "  {:>5}/{:<5} {}", c.correct, c.total, c.label);
    }
    if !r.failures.is_empty() {
        let _ = writeln!(s, "  {} failed examples counted as incorrect", r.failures.len());
    }
    s
}
