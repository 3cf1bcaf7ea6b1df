use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::ReformulateError;
use crate::stopwords;

/// Program plus arguments for the external extractor.
///
/// The program receives categories on stdin, one per line, and must print
/// `keyword<TAB>count` lines on stdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Strategy {
    /// Capitalized words that do not open their category string.
    Capitalization,
    /// Lowercased non-stopword words of two or more characters.
    NounLite,
    /// Delegates to a tagger or concept annotator in another process.
    External(ExternalCommand),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Capitalization => "capitalization",
            Strategy::NounLite => "nounlite",
            Strategy::External(_) => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractorConfig {
    pub strategy: Strategy,
    /// Lowercase words never reported as keywords.
    pub stopwords: HashSet<String>,
}

impl ExtractorConfig {
    /// `strategy` with the bundled English stopword list.
    pub fn new(strategy: Strategy) -> Self {
        ExtractorConfig {
            strategy,
            stopwords: stopwords::english_owned(),
        }
    }

    pub fn with_stopwords(mut self, stopwords: HashSet<String>) -> Self {
        self.stopwords = stopwords;
        self
    }

    /// Deterministic description for config fingerprints.
    pub fn describe(&self) -> String {
        let mut stop: Vec<&str> = self.stopwords.iter().map(String::as_str).collect();
        stop.sort_unstable();
        let cmd = match &self.strategy {
            Strategy::External(c) => format!(":{}:{}", c.program, c.args.join("\u{1f}")),
            _ => String::new(),
        };
        format!("{}{cmd}|stop={}", self.strategy.name(), stop.join(","))
    }
}

/// Word tokens of a category string: maximal alphanumeric runs.
pub fn category_words(category: &str) -> impl Iterator<Item = &str> {
    category.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty())
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

fn capitalization_keywords<'a>(
    category: &'a str,
    stop: &'a HashSet<String>,
) -> impl Iterator<Item = String> + 'a {
    category_words(category)
        .skip(1)
        .filter(|w| is_capitalized(w) && !stop.contains(&w.to_lowercase()))
        .map(str::to_string)
}

fn nounlite_keywords<'a>(
    category: &'a str,
    stop: &'a HashSet<String>,
) -> impl Iterator<Item = String> + 'a {
    category_words(category)
        .map(str::to_lowercase)
        .filter(|w| w.chars().count() >= 2 && !stop.contains(w))
}

/// Orders by count descending, then keyword ascending.
pub(crate) fn sort_counts(counts: HashMap<String, u64>) -> Vec<(String, u64)> {
    let mut out: Vec<(String, u64)> = counts.into_iter().collect();
    out.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Keyword occurrence counts over all `categories`, ordered by count
/// descending then keyword ascending.
pub fn extract_keywords<S: AsRef<str>>(
    categories: &[S],
    config: &ExtractorConfig,
) -> Result<Vec<(String, u64)>, ReformulateError> {
    if categories.is_empty() {
        return Ok(Vec::new());
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    match &config.strategy {
        Strategy::Capitalization => {
            for c in categories {
                for k in capitalization_keywords(c.as_ref(), &config.stopwords) {
                    *counts.entry(k).or_insert(0) += 1;
                }
            }
        }
        Strategy::NounLite => {
            for c in categories {
                for k in nounlite_keywords(c.as_ref(), &config.stopwords) {
                    *counts.entry(k).or_insert(0) += 1;
                }
            }
        }
        Strategy::External(cmd) => {
            for (k, n) in run_external(cmd, categories)? {
                if !config.stopwords.contains(&k.to_lowercase()) {
                    *counts.entry(k).or_insert(0) += n;
                }
            }
        }
    }
    Ok(sort_counts(counts))
}

fn run_external<S: AsRef<str>>(
    cmd: &ExternalCommand,
    categories: &[S],
) -> Result<Vec<(String, u64)>, ReformulateError> {
    let spawn_err = |e: std::io::Error| ReformulateError::External {
        command: cmd.program.clone(),
        diagnostics: e.to_string(),
    };
    let mut child = Command::new(&cmd.program)
        .args(&cmd.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(spawn_err)?;

    let mut payload = String::new();
    for c in categories {
        // categories are single-line by construction; flatten defensively
        payload.push_str(&c.as_ref().replace(['\n', '\r'], " "));
        payload.push('\n');
    }
    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = std::thread::spawn(move || {
        // a broken pipe here means the tool exited early; its status tells why
        let _ = stdin.write_all(payload.as_bytes());
    });
    let output = child.wait_with_output().map_err(spawn_err)?;
    let _ = writer.join();

    if !output.status.success() {
        return Err(ReformulateError::External {
            command: cmd.program.clone(),
            diagnostics: format!(
                "exit status {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ),
        });
    }

    let mut out = Vec::new();
    for (i, line) in BufReader::new(output.stdout.as_slice()).lines().enumerate() {
        let line = line.map_err(spawn_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| ReformulateError::ExternalProtocol {
            line: i + 1,
            reason: format!("{reason}: {line:?}"),
        };
        let (kw, n) = line.split_once('\t').ok_or_else(|| bad("missing TAB"))?;
        let n: u64 = n.trim().parse().map_err(|_| bad("count is not a non-negative integer"))?;
        if kw.is_empty() {
            return Err(bad("empty keyword"));
        }
        if n > 0 {
            out.push((kw.to_string(), n));
        }
    }
    Ok(out)
}
