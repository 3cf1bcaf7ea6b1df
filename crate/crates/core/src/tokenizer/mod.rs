//! Tokenizers used to enforce the token budget on sentence queries.

mod bpe;

use std::ops::Range;

use thiserror::Error;

pub use bpe::{bytes_to_unicode, Gpt2Tokenizer};

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("cannot read tokenizer asset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid vocabulary: {0}")]
    Vocab(String),
    #[error("invalid merges file, line {line}: {reason}")]
    Merges { line: usize, reason: String },
}

/// A deterministic tokenizer that reports where each token lies in the input.
pub trait Tokenizer: Send + Sync {
    /// Byte ranges of the tokens of `text`, in order. Ranges are contiguous
    /// for tokenizers that cover every byte; a range may end inside a
    /// multi-byte character for byte-level tokenizers.
    fn token_spans(&self, text: &str) -> Vec<Range<usize>>;

    fn count(&self, text: &str) -> usize {
        self.token_spans(text).len()
    }

    fn name(&self) -> &str;

    /// False for approximations that should not be used where exact
    /// parity with a reference tokenizer matters.
    fn is_faithful(&self) -> bool {
        true
    }
}

/// Splits on whitespace. Only an approximation of a subword tokenizer.
#[derive(Debug, Default, Clone, Copy)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    spans.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push(s..text.len());
        }
        spans
    }

    fn name(&self) -> &str {
        "whitespace"
    }

    fn is_faithful(&self) -> bool {
        false
    }
}

/// Longest prefix of `text` holding at most `budget` tokens.
///
/// The cut is placed at the end of token number `budget` (moved back to a
/// character boundary if needed). Returns the prefix and its token count as
/// measured by re-tokenizing the prefix; if re-tokenizing yields more than
/// `budget` tokens the cut moves back one token at a time.
pub fn truncate_to_budget<'a>(tokenizer: &dyn Tokenizer, text: &'a str, budget: usize) -> (&'a str, usize) {
    let spans = tokenizer.token_spans(text);
    if spans.len() <= budget {
        return (text, spans.len());
    }
    let mut keep = budget;
    while keep > 0 {
        let mut end = spans[keep - 1].end;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        let prefix = &text[..end];
        let n = tokenizer.count(prefix);
        if n <= budget {
            return (prefix, n);
        }
        keep -= 1;
    }
    ("", 0)
}
