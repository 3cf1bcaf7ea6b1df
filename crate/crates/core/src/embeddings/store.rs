use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{EmbeddingError, EmbeddingVector};

/// Word vectors loaded from a text vector file (word2vec text / GloVe /
/// exported fastText).
///
/// Lookups try the exact word first and then its lowercase form against the
/// lowercased vocabulary, so both cased and uncased files work.
#[derive(Debug, Clone)]
pub struct StaticVectorStore {
    dim: usize,
    words: Vec<String>,
    exact: HashMap<String, u32>,
    folded: HashMap<String, u32>,
    data: Vec<f32>,
}

/// Result of averaging a phrase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseEmbedding {
    pub vector: EmbeddingVector,
    /// Constituent words with no vector.
    pub oov: Vec<String>,
}

pub fn load_static_vectors(path: &Path) -> Result<StaticVectorStore, EmbeddingError> {
    let file = File::open(path)?;
    StaticVectorStore::from_reader(BufReader::new(file), &path.display().to_string())
}

fn is_connector(token: &str) -> bool {
    token == "&" || token.chars().all(|c| !c.is_alphanumeric())
}

impl StaticVectorStore {
    /// Parses the text format. `origin` is only used in error messages.
    pub fn from_reader<R: BufRead>(reader: R, origin: &str) -> Result<Self, EmbeddingError> {
        let err = |line: usize, reason: String| EmbeddingError::VectorFile {
            path: origin.to_string(),
            line,
            reason,
        };
        let mut store = StaticVectorStore {
            dim: 0,
            words: Vec::new(),
            exact: HashMap::new(),
            folded: HashMap::new(),
            data: Vec::new(),
        };
        let mut header_dim: Option<usize> = None;
        let mut first = true;

        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else {
                continue;
            };
            let rest: Vec<&str> = fields.collect();

            if first {
                first = false;
                if rest.len() == 1 {
                    if let (Ok(_count), Ok(dim)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                        if dim == 0 {
                            return Err(err(line_no, "header declares dimension 0".into()));
                        }
                        header_dim = Some(dim);
                        continue;
                    }
                }
            }

            if rest.is_empty() {
                return Err(err(line_no, format!("word {word:?} has no values")));
            }
            let expected = if store.dim > 0 { Some(store.dim) } else { header_dim };
            if let Some(d) = expected {
                if rest.len() != d {
                    return Err(err(line_no, format!("expected {d} values, found {}", rest.len())));
                }
            }
            let mut values = Vec::with_capacity(rest.len());
            for f in &rest {
                let v: f32 = f
                    .parse()
                    .map_err(|_| err(line_no, format!("cannot parse {f:?} as a number")))?;
                if !v.is_finite() {
                    return Err(err(line_no, format!("non-finite value {f:?}")));
                }
                values.push(v);
            }

            if store.exact.contains_key(word) {
                log::warn!("{origin}, line {line_no}: duplicate word {word:?}, keeping the first");
                continue;
            }
            store.dim = values.len();
            let id = store.words.len() as u32;
            store.exact.insert(word.to_string(), id);
            store.folded.entry(word.to_lowercase()).or_insert(id);
            store.words.push(word.to_string());
            store.data.extend_from_slice(&values);
        }

        if store.words.is_empty() {
            return Err(err(0, "no vectors found".into()));
        }
        Ok(store)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Vector for `word` without copying, or `None` if absent.
    pub fn get(&self, word: &str) -> Option<&[f32]> {
        let id = match self.exact.get(word) {
            Some(&id) => id,
            None => *self.folded.get(&word.to_lowercase())?,
        };
        let start = id as usize * self.dim;
        Some(&self.data[start..start + self.dim])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    pub fn embed_word(&self, word: &str) -> Option<EmbeddingVector> {
        self.get(word).map(|v| EmbeddingVector(v.to_vec()))
    }

    /// Mean of the in-vocabulary vectors among `words`; `None` if there are none.
    pub fn mean_of<'w, I>(&self, words: I) -> (Option<EmbeddingVector>, Vec<String>)
    where
        I: IntoIterator<Item = &'w str>,
    {
        let mut found = Vec::new();
        let mut oov = Vec::new();
        for w in words {
            match self.get(w) {
                Some(v) => found.push(v),
                None => oov.push(w.to_string()),
            }
        }
        (EmbeddingVector::mean(found), oov)
    }

    /// Averages the vectors of a label phrase's words.
    ///
    /// Tokens are whitespace separated; `&` and punctuation-only tokens are
    /// dropped, every other word (stopwords included) is kept.
    pub fn embed_phrase(&self, phrase: &str) -> Result<PhraseEmbedding, EmbeddingError> {
        let words = phrase.split_whitespace().filter(|t| !is_connector(t));
        let (vector, oov) = self.mean_of(words);
        let vector = vector.ok_or_else(|| EmbeddingError::PhraseOutOfVocabulary(phrase.to_string()))?;
        if !oov.is_empty() {
            log::debug!("phrase {phrase:?}: no vectors for {oov:?}");
        }
        Ok(PhraseEmbedding { vector, oov })
    }

    /// Stable description for config fingerprints.
    pub fn describe(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (i, w) in self.words.iter().enumerate() {
            h.update(w.as_bytes());
            h.update([0]);
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                h.update(v.to_le_bytes());
            }
        }
        format!("static(dim={},n={},sha256={})", self.dim, self.len(), hex::encode(h.finalize()))
    }
}
