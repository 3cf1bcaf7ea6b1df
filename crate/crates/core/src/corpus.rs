//! Knowledge-corpus ingestion.
//!
//! The corpus is a line-delimited JSON file, one article per line:
//!
//! ```text
//! {"id": "d1", "title": "Red fox", "text": "...", "categories": ["Foxes", "Category: Mammals"]}
//! ```
//!
//! [`Ingest`] streams records, normalizes categories and drops articles that
//! are too short or carry no categories. Memory use is bounded by the set of
//! document ids seen so far (needed for duplicate detection), not by the
//! article bodies.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Articles with fewer words than this are dropped.
pub const MIN_WORDS: usize = 20;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate document id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("I/O error reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    /// Record-level errors leave the stream usable; everything else ends it.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, CorpusError::Malformed { .. })
    }
}

/// One knowledge-corpus article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub content: String,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_read: usize,
    pub kept: usize,
    pub dropped_short: usize,
    pub dropped_no_category: usize,
    /// Lines that could not be parsed. Not part of `total_read`.
    pub malformed: usize,
}

impl CorpusStats {
    pub fn merge(&mut self, other: &CorpusStats) {
        self.total_read += other.total_read;
        self.kept += other.kept;
        self.dropped_short += other.dropped_short;
        self.dropped_no_category += other.dropped_no_category;
        self.malformed += other.malformed;
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    categories: Vec<String>,
    #[serde(default)]
    title: Option<String>,
}

/// Number of maximal non-whitespace runs in `text`.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Trim a category, strip a case-insensitive `Category:` prefix and trim again.
/// Returns `None` when nothing is left.
pub fn normalize_category(raw: &str) -> Option<String> {
    const PREFIX: &str = "category:";
    let mut s = raw.trim();
    // repeated so that "Category:Category:X" cannot leave a prefix behind
    while s.len() >= PREFIX.len()
        && s.is_char_boundary(PREFIX.len())
        && s[..PREFIX.len()].eq_ignore_ascii_case(PREFIX)
    {
        s = s[PREFIX.len()..].trim();
    }
    (!s.is_empty()).then(|| s.to_string())
}

/// Why a well-formed record was not kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    TooShort,
    NoCategory,
}

/// Applies both filters; a record failing both is reported as too short.
pub fn judge(content: &str, categories: &[String]) -> Verdict {
    if word_count(content) < MIN_WORDS {
        Verdict::TooShort
    } else if categories.is_empty() {
        Verdict::NoCategory
    } else {
        Verdict::Keep
    }
}

/// Streaming corpus reader.
///
/// Yields kept documents in input order. Malformed lines come through as
/// `Err(CorpusError::Malformed)` and iteration continues; a duplicate id or an
/// I/O failure is yielded once and ends the stream.
pub struct Ingest<R> {
    reader: R,
    line_no: usize,
    buf: String,
    seen: HashMap<String, usize>,
    stats: CorpusStats,
    done: bool,
}

impl<R: BufRead> Ingest<R> {
    pub fn new(reader: R) -> Self {
        Ingest {
            reader,
            line_no: 0,
            buf: String::new(),
            seen: HashMap::new(),
            stats: CorpusStats::default(),
            done: false,
        }
    }

    pub fn stats(&self) -> CorpusStats {
        self.stats
    }

    fn process_line(&mut self) -> Option<Result<Document, CorpusError>> {
        let line = self.buf.trim();
        if line.is_empty() {
            return None;
        }
        let record: RawRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                self.stats.malformed += 1;
                return Some(Err(CorpusError::Malformed {
                    line: self.line_no,
                    reason: e.to_string(),
                }));
            }
        };
        if record.id.is_empty() {
            self.stats.malformed += 1;
            return Some(Err(CorpusError::Malformed {
                line: self.line_no,
                reason: "empty id".into(),
            }));
        }
        if let Some(&first_line) = self.seen.get(&record.id) {
            self.done = true;
            return Some(Err(CorpusError::DuplicateId {
                id: record.id,
                first_line,
                second_line: self.line_no,
            }));
        }
        self.seen.insert(record.id.clone(), self.line_no);
        self.stats.total_read += 1;

        let categories: Vec<String> = record
            .categories
            .iter()
            .filter_map(|c| normalize_category(c))
            .collect();
        match judge(&record.text, &categories) {
            Verdict::TooShort => {
                self.stats.dropped_short += 1;
                None
            }
            Verdict::NoCategory => {
                self.stats.dropped_no_category += 1;
                None
            }
            Verdict::Keep => {
                self.stats.kept += 1;
                Some(Ok(Document {
                    doc_id: record.id,
                    title: record.title.unwrap_or_default(),
                    content: record.text,
                    categories,
                }))
            }
        }
    }
}

impl<R: BufRead> Iterator for Ingest<R> {
    type Item = Result<Document, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => self.done = true,
                Ok(_) => {
                    self.line_no += 1;
                    if let Some(item) = self.process_line() {
                        return Some(item);
                    }
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(CorpusError::Io(e)));
                }
            }
        }
        None
    }
}

/// Convenience wrapper around [`Ingest`] for callers that want everything in
/// memory. Malformed lines are logged and skipped; fatal errors abort.
pub fn ingest_all<R: BufRead>(reader: R) -> Result<(Vec<Document>, CorpusStats), CorpusError> {
    let mut ingest = Ingest::new(reader);
    let mut docs = Vec::new();
    for item in ingest.by_ref() {
        match item {
            Ok(doc) => docs.push(doc),
            Err(e) if !e.is_fatal() => log::warn!("{e}"),
            Err(e) => return Err(e),
        }
    }
    Ok((docs, ingest.stats()))
}

/// Serializes a document back into the corpus line format.
pub fn to_record_line(doc: &Document) -> String {
    serde_json::json!({
        "id": doc.doc_id,
        "title": doc.title,
        "text": doc.content,
        "categories": doc.categories,
    })
    .to_string()
}
