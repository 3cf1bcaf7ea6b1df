//! Brute-force reference implementations shared by the integration tests.
//! Written from the formulas, without calling into the code under test
//! (the bundled stopword list is reused as data).

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn stopwords() -> HashSet<&'static str> {
    qzero_core::stopwords::ENGLISH.iter().copied().collect()
}

/// Lowercase, split on non-alphanumerics, drop stopwords.
pub fn analyze(text: &str, stop: &HashSet<&str>) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            if !stop.contains(cur.as_str()) {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    out
}

/// Okapi BM25 over every document, sorted by score descending then doc id;
/// zero-score documents excluded; first `k` kept.
pub fn bm25_rank(docs: &[(String, String)], query: &str, k: usize, k1: f64, b: f64) -> Vec<(String, f64)> {
    let stop = stopwords();
    let toks: Vec<Vec<String>> = docs.iter().map(|(_, t)| analyze(t, &stop)).collect();
    let n = docs.len() as f64;
    let avgdl = toks.iter().map(Vec::len).sum::<usize>() as f64 / n;

    let mut qterms: Vec<(String, f64)> = Vec::new();
    for t in analyze(query, &stop) {
        match qterms.iter_mut().find(|(s, _)| *s == t) {
            Some((_, c)) => *c += 1.0,
            None => qterms.push((t, 1.0)),
        }
    }

    let mut scored: Vec<(String, f64)> = Vec::new();
    for (i, (id, _)) in docs.iter().enumerate() {
        let dl = toks[i].len() as f64;
        let mut score = 0.0;
        let mut matched = false;
        for (term, qtf) in &qterms {
            let tf = toks[i].iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = toks.iter().filter(|d| d.contains(term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * (tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl))) * qtf;
            matched = true;
        }
        if matched && score > 0.0 {
            scored.push((id.clone(), score));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Weighted-keyword scoring: for each label, sum of `w * cos(K, y)` over
/// keywords with a vector. Returns the scores and the index of the first
/// maximal label.
pub fn algorithm1(keywords: &[(Option<Vec<f32>>, f64)], labels: &[Vec<f32>]) -> (Vec<f64>, usize) {
    let scores: Vec<f64> = labels
        .iter()
        .map(|y| {
            let ny = dot(y, y).sqrt();
            keywords
                .iter()
                .filter_map(|(v, w)| v.as_ref().map(|v| (v, w)))
                .map(|(v, w)| w * (dot(v, y) / (dot(v, v).sqrt() * ny)))
                .sum()
        })
        .collect();
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    (scores, best)
}

fn words(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in s.char_indices() {
        match (ch.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(st)) => {
                out.push(&s[st..i]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(st) = start {
        out.push(&s[st..]);
    }
    out
}

fn sorted(counts: BTreeMap<String, u64>) -> Vec<(String, u64)> {
    let mut v: Vec<(String, u64)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Lowercased words of length >= 2 that are not stopwords, counted.
pub fn nounlite_counts(categories: &[String]) -> Vec<(String, u64)> {
    let stop = stopwords();
    let mut counts = BTreeMap::new();
    for c in categories {
        for w in words(c) {
            let w = w.to_lowercase();
            if w.chars().count() >= 2 && !stop.contains(w.as_str()) {
                *counts.entry(w).or_insert(0) += 1;
            }
        }
    }
    sorted(counts)
}

/// Capitalized words after the first word of each category, minus stopwords.
pub fn capitalization_counts(categories: &[String]) -> Vec<(String, u64)> {
    let stop = stopwords();
    let mut counts = BTreeMap::new();
    for c in categories {
        for w in words(c).into_iter().skip(1) {
            if w.chars().next().is_some_and(char::is_uppercase) && !stop.contains(w.to_lowercase().as_str()) {
                *counts.entry(w.to_string()).or_insert(0) += 1;
            }
        }
    }
    sorted(counts)
}

/// A random unit direction scaled to a norm in `[lo, hi]`.
pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-3 {
            continue;
        }
        let target = rng.gen_range(lo..=hi);
        return v.iter().map(|x| (x / n * target) as f32).collect();
    }
}
