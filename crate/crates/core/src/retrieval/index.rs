use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::analysis::{AnalysisConfig, Analyzer};
use super::bm25::{idf, tf_weight, Bm25Params};
use super::RetrievalError;
use crate::corpus::Document;

/// Internal document number: position of the doc id in ascending id order.
pub type DocOrd = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: DocOrd,
    pub tf: u32,
}

/// One retrieval hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedArticle {
    pub doc_id: String,
    pub score: f64,
    /// 1 is best.
    pub rank: usize,
    /// The article's categories in stored order.
    pub categories: Vec<String>,
}

/// In-memory inverted index with per-document lengths and categories.
///
/// Documents are numbered in ascending `doc_id` order, so postings sorted by
/// [`DocOrd`] are sorted by doc id and score ties break toward the smaller id
/// by comparing ordinals.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(crate) doc_ids: Vec<String>,
    pub(crate) doc_lengths: Vec<u32>,
    pub(crate) doc_categories: Vec<Vec<String>>,
    pub(crate) postings: HashMap<String, Vec<Posting>>,
    pub(crate) total_tokens: u64,
    pub(crate) analysis: AnalysisConfig,
    pub(crate) params: Bm25Params,
}

impl InvertedIndex {
    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.total_tokens as f64 / self.doc_ids.len() as f64
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn analysis(&self) -> AnalysisConfig {
        self.analysis
    }

    /// BM25 parameters recorded at build time; used when a query does not override them.
    pub fn default_params(&self) -> Bm25Params {
        self.params
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    pub fn doc_id(&self, doc: DocOrd) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn doc_length(&self, doc: DocOrd) -> u32 {
        self.doc_lengths[doc as usize]
    }

    pub fn doc_ord(&self, doc_id: &str) -> Option<DocOrd> {
        self.doc_ids
            .binary_search_by(|probe| probe.as_str().cmp(doc_id))
            .ok()
            .map(|i| i as DocOrd)
    }

    pub fn categories(&self, doc: DocOrd) -> &[String] {
        &self.doc_categories[doc as usize]
    }

    /// Terms in lexicographic order, for deterministic serialization.
    pub fn sorted_terms(&self) -> Vec<&str> {
        let mut terms: Vec<&str> = self.postings.keys().map(String::as_str).collect();
        terms.sort_unstable();
        terms
    }

    /// BM25 of one (tf, df, dl) triple against this index's statistics.
    pub fn bm25_score(
        &self,
        tf: u64,
        df: u64,
        dl: u64,
        params: Bm25Params,
    ) -> Result<f64, RetrievalError> {
        super::bm25::bm25_score(tf, df, dl, self.num_docs() as u64, self.avgdl(), params)
    }

    /// Top-`k` documents by summed BM25 over the analyzed query terms.
    ///
    /// A term repeated in the query contributes once per occurrence. Only
    /// documents with a positive score are returned. Equal scores are ordered
    /// by ascending doc id.
    pub fn search(
        &self,
        query: &str,
        k: usize,
        params: Bm25Params,
    ) -> Result<Vec<RankedArticle>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::Contract("k must be >= 1".into()));
        }
        params.validate()?;
        let terms = Analyzer::new(self.analysis).analyze(query);

        // query term frequencies, first-occurrence order
        let mut qterms: Vec<(&str, u32)> = Vec::new();
        for t in &terms {
            match qterms.iter_mut().find(|(s, _)| *s == t.as_str()) {
                Some((_, n)) => *n += 1,
                None => qterms.push((t.as_str(), 1)),
            }
        }

        let n_docs = self.num_docs() as u64;
        let avgdl = self.avgdl();
        let mut acc: HashMap<DocOrd, f64> = HashMap::new();
        for (term, qtf) in qterms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let w = idf(list.len() as u64, n_docs);
            for p in list {
                let dl = self.doc_lengths[p.doc as usize] as u64;
                let s = w * tf_weight(p.tf as u64, dl, avgdl, params) * qtf as f64;
                *acc.entry(p.doc).or_insert(0.0) += s;
            }
        }

        let mut hits: Vec<(DocOrd, f64)> = acc.into_iter().filter(|&(_, s)| s > 0.0).collect();
        let by_rank = |a: &(DocOrd, f64), b: &(DocOrd, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if hits.len() > k {
            hits.select_nth_unstable_by(k - 1, by_rank);
            hits.truncate(k);
        }
        hits.sort_unstable_by(by_rank);

        Ok(hits
            .into_iter()
            .enumerate()
            .map(|(i, (doc, score))| RankedArticle {
                doc_id: self.doc_ids[doc as usize].clone(),
                score,
                rank: i + 1,
                categories: self.doc_categories[doc as usize].clone(),
            })
            .collect())
    }

    /// Checks the structural invariants. Used after loading and in tests.
    pub fn check_invariants(&self) -> Result<(), RetrievalError> {
        let bad = |m: String| Err(RetrievalError::Corrupt(m));
        let n = self.doc_ids.len();
        if n == 0 {
            return bad("index has no documents".into());
        }
        if self.doc_lengths.len() != n || self.doc_categories.len() != n {
            return bad("per-document tables disagree in length".into());
        }
        if self.doc_ids.windows(2).any(|w| w[0] >= w[1]) {
            return bad("doc ids not strictly ascending".into());
        }
        let total: u64 = self.doc_lengths.iter().map(|&l| l as u64).sum();
        if total != self.total_tokens {
            return bad("token total does not match document lengths".into());
        }
        for (term, list) in &self.postings {
            if list.is_empty() {
                return bad(format!("empty postings list for {term:?}"));
            }
            if list.windows(2).any(|w| w[0].doc >= w[1].doc) {
                return bad(format!("postings for {term:?} not sorted"));
            }
            if list.iter().any(|p| p.tf == 0 || p.doc as usize >= n) {
                return bad(format!("bad posting for {term:?}"));
            }
        }
        Ok(())
    }
}

/// (doc_id, length, categories, term counts)
type Staged = (String, u32, Vec<String>, BTreeMap<String, u32>);

/// Builds an index in memory. Documents may arrive in any order.
pub fn build_index<I>(
    docs: I,
    analysis: AnalysisConfig,
    params: Bm25Params,
) -> Result<InvertedIndex, RetrievalError>
where
    I: IntoIterator<Item = Document>,
{
    params.validate()?;
    let analyzer = Analyzer::new(analysis);

    let mut staged: Vec<Staged> = Vec::new();
    for doc in docs {
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        let tokens = analyzer.analyze(&doc.content);
        let len = u32::try_from(tokens.len())
            .map_err(|_| RetrievalError::Contract(format!("document {} too long", doc.doc_id)))?;
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        staged.push((doc.doc_id, len, doc.categories, counts));
    }
    if staged.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    staged.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = staged.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(RetrievalError::DuplicateDoc(w[0].0.clone()));
    }
    if staged.len() > DocOrd::MAX as usize {
        return Err(RetrievalError::Contract("too many documents".into()));
    }

    let mut index = InvertedIndex {
        doc_ids: Vec::with_capacity(staged.len()),
        doc_lengths: Vec::with_capacity(staged.len()),
        doc_categories: Vec::with_capacity(staged.len()),
        postings: HashMap::new(),
        total_tokens: 0,
        analysis,
        params,
    };
    for (ord, (id, len, cats, counts)) in staged.into_iter().enumerate() {
        for (term, tf) in counts {
            index.postings.entry(term).or_default().push(Posting {
                doc: ord as DocOrd,
                tf,
            });
        }
        index.doc_ids.push(id);
        index.doc_lengths.push(len);
        index.doc_categories.push(cats);
        index.total_tokens += len as u64;
    }
    Ok(index)
}
