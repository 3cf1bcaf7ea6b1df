use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::stopwords;

/// Text analysis applied identically at index and query time.
///
/// Lowercasing and splitting on non-alphanumeric characters are always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub remove_stopwords: bool,
    /// English Snowball (Porter2) stemming.
    pub stem: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            remove_stopwords: true,
            stem: false,
        }
    }
}

/// Reusable analyzer; holds the stemmer so it is built once.
pub struct Analyzer {
    config: AnalysisConfig,
    stemmer: Option<Stemmer>,
}

impl Analyzer {
    pub fn new(config: AnalysisConfig) -> Self {
        Analyzer {
            config,
            stemmer: config.stem.then(|| Stemmer::create(Algorithm::English)),
        }
    }

    pub fn config(&self) -> AnalysisConfig {
        self.config
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        let stop = stopwords::english();
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|s| !s.is_empty())
            .map(str::to_lowercase)
            .filter(|t| !(self.config.remove_stopwords && stop.contains(t.as_str())))
            .filter_map(|t| match &self.stemmer {
                Some(stemmer) => {
                    let stemmed = stemmer.stem(&t).into_owned();
                    (!stemmed.is_empty()).then_some(stemmed)
                }
                None => Some(t),
            })
            .collect()
    }
}

pub fn analyze(text: &str, config: &AnalysisConfig) -> Vec<String> {
    Analyzer::new(*config).analyze(text)
}
