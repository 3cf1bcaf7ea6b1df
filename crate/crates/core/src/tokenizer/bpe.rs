//! Byte-level BPE in the GPT-2 style.
//!
//! Loads a `vocab.json` (token string -> id) and `merges.txt` (one `a b` pair
//! per line, highest priority first) pair. Text is split with the GPT-2
//! pre-tokenization pattern, each piece is mapped byte-by-byte onto the
//! printable-unicode alphabet and merged by rank.

use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use regex::Regex;

use super::{Tokenizer, TokenizerError};

// The reference pattern ends with `\s+(?!\S)|\s+`; the regex crate has no
// lookahead, so whitespace runs are shortened by hand in `pieces`.
const PRETOKENIZE: &str = r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+";

/// The reversible byte -> char table used by GPT-2's byte-level vocabulary.
pub fn bytes_to_unicode() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..=255u8 {
        let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
        table[b as usize] = if printable {
            char::from(b)
        } else {
            let c = char::from_u32(256 + extra).expect("valid code point");
            extra += 1;
            c
        };
    }
    table
}

pub struct Gpt2Tokenizer {
    pattern: Regex,
    byte_ids: [u32; 256],
    /// (left id, right id) -> (rank, merged id)
    merges: HashMap<(u32, u32), (u32, u32)>,
    /// id -> raw bytes
    tokens: Vec<Vec<u8>>,
}

impl std::fmt::Debug for Gpt2Tokenizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gpt2Tokenizer")
            .field("vocab", &self.tokens.len())
            .field("merges", &self.merges.len())
            .finish()
    }
}

impl Gpt2Tokenizer {
    /// Loads `vocab.json` and `merges.txt` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, TokenizerError> {
        Self::from_files(&dir.join("vocab.json"), &dir.join("merges.txt"))
    }

    pub fn from_files(vocab: &Path, merges: &Path) -> Result<Self, TokenizerError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| TokenizerError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        Self::from_strs(&read(vocab)?, &read(merges)?)
    }

    pub fn from_strs(vocab_json: &str, merges_txt: &str) -> Result<Self, TokenizerError> {
        let vocab: HashMap<String, u32> =
            serde_json::from_str(vocab_json).map_err(|e| TokenizerError::Vocab(e.to_string()))?;

        let mut char_to_byte = HashMap::with_capacity(256);
        for (b, c) in bytes_to_unicode().iter().enumerate() {
            char_to_byte.insert(*c, b as u8);
        }
        let size = vocab.values().copied().max().map_or(0, |m| m as usize + 1);
        let mut tokens = vec![Vec::new(); size];
        for (tok, &id) in &vocab {
            // special tokens such as <|endoftext|> are plain ASCII and map 1:1
            let bytes: Option<Vec<u8>> = tok.chars().map(|c| char_to_byte.get(&c).copied()).collect();
            tokens[id as usize] = bytes.ok_or_else(|| {
                TokenizerError::Vocab(format!("token {tok:?} is not byte-level encoded"))
            })?;
        }

        let table = bytes_to_unicode();
        let mut byte_ids = [0u32; 256];
        for (b, c) in table.iter().enumerate() {
            byte_ids[b] = *vocab
                .get(&c.to_string())
                .ok_or_else(|| TokenizerError::Vocab(format!("missing byte token for 0x{b:02x}")))?;
        }

        let mut merges = HashMap::new();
        let mut rank = 0u32;
        for (i, line) in merges_txt.lines().enumerate() {
            if line.starts_with("#version") || line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| TokenizerError::Merges { line: i + 1, reason };
            let (a, b) = line
                .split_once(' ')
                .ok_or_else(|| err("expected two space-separated symbols".into()))?;
            let id = |s: &str| vocab.get(s).copied().ok_or_else(|| err(format!("{s:?} not in vocabulary")));
            let merged = id(&format!("{a}{b}"))?;
            merges.entry((id(a)?, id(b)?)).or_insert((rank, merged));
            rank += 1;
        }

        Ok(Gpt2Tokenizer {
            pattern: Regex::new(PRETOKENIZE).expect("static pattern"),
            byte_ids,
            merges,
            tokens,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    /// Byte ranges of the pre-tokenized pieces.
    fn pieces(&self, text: &str) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let Some(m) = self.pattern.find_at(text, pos) else {
                break;
            };
            let mut end = m.end();
            let s = m.as_str();
            if end < text.len() && s.chars().all(char::is_whitespace) && s.chars().count() > 1 {
                // leave the last whitespace char for the following piece
                let last = s.chars().next_back().map_or(0, char::len_utf8);
                end -= last;
            }
            out.push(m.start()..end);
            pos = end;
        }
        out
    }

    fn bpe(&self, piece: &[u8]) -> Vec<u32> {
        let mut word: Vec<u32> = piece.iter().map(|&b| self.byte_ids[b as usize]).collect();
        while word.len() > 1 {
            let best = word
                .windows(2)
                .filter_map(|w| self.merges.get(&(w[0], w[1])).map(|&(r, m)| (r, (w[0], w[1]), m)))
                .min_by_key(|&(r, _, _)| r);
            let Some((_, pair, merged)) = best else {
                break;
            };
            let mut next = Vec::with_capacity(word.len());
            let mut i = 0;
            while i < word.len() {
                if i + 1 < word.len() && (word[i], word[i + 1]) == pair {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(word[i]);
                    i += 1;
                }
            }
            word = next;
        }
        word
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        self.pieces(text)
            .into_iter()
            .flat_map(|r| self.bpe(&text.as_bytes()[r]))
            .collect()
    }

    /// Decodes ids to text; invalid UTF-8 (from a cut inside a character) is
    /// replaced with U+FFFD.
    pub fn decode(&self, ids: &[u32]) -> String {
        let bytes: Vec<u8> = ids
            .iter()
            .flat_map(|&id| self.tokens.get(id as usize).map(Vec::as_slice).unwrap_or(&[]))
            .copied()
            .collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }
}

impl Tokenizer for Gpt2Tokenizer {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        for piece in self.pieces(text) {
            let mut start = piece.start;
            for id in self.bpe(&text.as_bytes()[piece]) {
                let end = start + self.tokens[id as usize].len();
                spans.push(start..end);
                start = end;
            }
        }
        spans
    }

    fn name(&self) -> &str {
        "gpt2-bpe"
    }
}
