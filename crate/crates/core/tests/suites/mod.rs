//! Randomized conformance suites. Each returns a one-line summary on success
//! and a description of the first mismatch otherwise. Used by the per-area
//! integration tests and by the acceptance runner.

#![allow(dead_code)]

use std::sync::Arc;

use qzero_core::classify::{classify_static, LabelSet};
use qzero_core::corpus::Document;
use qzero_core::embeddings::StaticVectorStore;
use qzero_core::reformulate::{
    extract_keywords, make_sentence_query, ExtractorConfig, Strategy, WeightedKeywordQuery,
};
use qzero_core::retrieval::{build_index, persist, AnalysisConfig, Bm25Params, Bm25Retriever, RankedArticle, Retriever};
use qzero_core::tokenizer::{Gpt2Tokenizer, Tokenizer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracles;

pub const BM25_CORPORA: usize = 25;
pub const BM25_QUERIES: usize = 100;
pub const ALG1_INSTANCES: usize = 500;
pub const REFORM_CASES: usize = 1000;

const STOP_SAMPLE: &[&str] = &["the", "of", "and", "in", "The", "A", "to"];

fn random_text(rng: &mut ChaCha8Rng, vocab: &[String], len: usize) -> String {
    let mut s = String::new();
    for i in 0..len {
        if i > 0 {
            s.push_str([" ", " ", " ", ", ", "-", "  ", "; "].choose(rng).unwrap());
        }
        if rng.gen_bool(0.15) {
            s.push_str(STOP_SAMPLE.choose(rng).unwrap());
        } else {
            let w = vocab.choose(rng).unwrap();
            if rng.gen_bool(0.2) {
                s.push_str(&w.to_uppercase());
            } else {
                s.push_str(w);
            }
        }
    }
    // at least one indexable term
    s.push(' ');
    s.push_str(vocab.choose(rng).unwrap());
    s
}

/// Random corpora ranked by the index and by the brute-force oracle.
pub fn bm25_suite(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = Bm25Params::default();
    let mut compared = 0usize;
    let mut ties = 0usize;
    for c in 0..BM25_CORPORA {
        let vocab_size = rng.gen_range(5..=200);
        let vocab: Vec<String> = (0..vocab_size).map(|i| format!("w{i}")).collect();
        let n_docs = rng.gen_range(1..=50);
        let mut docs: Vec<(String, String)> = Vec::new();
        let mut ids: Vec<u32> = (0..1000).collect();
        ids.shuffle(&mut rng);
        for (i, id) in ids.iter().take(n_docs).enumerate() {
            let text = if i > 0 && rng.gen_bool(0.1) {
                // identical text under another id: exact score ties
                docs[rng.gen_range(0..docs.len())].1.clone()
            } else {
                let len = rng.gen_range(1..60);
                random_text(&mut rng, &vocab, len)
            };
            docs.push((format!("doc-{id}"), text));
        }
        let documents: Vec<Document> = docs
            .iter()
            .map(|(id, text)| Document {
                doc_id: id.clone(),
                title: String::new(),
                content: text.clone(),
                categories: vec![format!("Category of {id}")],
            })
            .collect();
        let index = build_index(documents, AnalysisConfig::default(), params).map_err(|e| e.to_string())?;

        // every other corpus goes through a save/load round trip
        let _dir;
        let index = if c % 2 == 1 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let path = dir.path().join("idx");
            persist::save(&index, &path).map_err(|e| e.to_string())?;
            let loaded = persist::load(&path).map_err(|e| e.to_string())?;
            _dir = dir;
            loaded
        } else {
            index
        };
        let retriever = Bm25Retriever::new(Arc::new(index), params).map_err(|e| e.to_string())?;

        for q in 0..BM25_QUERIES {
            let qlen = rng.gen_range(1..=8);
            let mut words: Vec<String> = (0..qlen)
                .map(|_| match rng.gen_range(0..10) {
                    0 => "zzunknown".to_string(),
                    1 => STOP_SAMPLE.choose(&mut rng).unwrap().to_string(),
                    _ => vocab.choose(&mut rng).unwrap().clone(),
                })
                .collect();
            if rng.gen_bool(0.2) {
                let w = words[0].clone();
                words.push(w);
            }
            let query = words.join(" ");
            let k = rng.gen_range(1..=60);
            let got: Vec<RankedArticle> = retriever.retrieve(&query, k).map_err(|e| e.to_string())?;
            let want = oracles::bm25_rank(&docs, &query, k, params.k1, params.b);
            let where_ = || format!("corpus {c}, query {q} {query:?}, k {k}");
            if got.len() != want.len() {
                return Err(format!("{}: {} hits, oracle {}", where_(), got.len(), want.len()));
            }
            for (i, (g, (wid, ws))) in got.iter().zip(&want).enumerate() {
                if g.doc_id != *wid {
                    return Err(format!("{}: rank {} is {}, oracle {wid}", where_(), i + 1, g.doc_id));
                }
                if (g.score - ws).abs() > 1e-9 {
                    return Err(format!("{}: {} scored {}, oracle {ws}", where_(), g.doc_id, g.score));
                }
                if g.rank != i + 1 {
                    return Err(format!("{}: rank field {} at position {}", where_(), g.rank, i + 1));
                }
            }
            ties += want.windows(2).filter(|w| w[0].1 == w[1].1).count();
            compared += 1;
        }
    }
    Ok(format!("{BM25_CORPORA} corpora x {BM25_QUERIES} queries = {compared} rankings match (scores within 1e-9, {ties} exact ties ordered by doc id)"))
}

fn fmt_vec(v: &[f32]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

/// Random weighted-keyword instances scored by the classifier and the oracle.
pub fn algorithm1_suite(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut forced_ties = 0usize;
    for case in 0..ALG1_INSTANCES {
        let dim = rng.gen_range(1..=8);
        let n_labels = rng.gen_range(2..=6);
        let n_kw = rng.gen_range(1..=10);
        let mut label_vecs: Vec<Vec<f32>> = (0..n_labels).map(|_| oracles::random_vector(&mut rng, dim, 0.5, 2.0)).collect();
        let tie = rng.gen_bool(0.2);
        if tie {
            // two labels with parallel vectors score identically
            let (a, b) = (rng.gen_range(0..n_labels), rng.gen_range(0..n_labels));
            if a != b {
                label_vecs[b] = label_vecs[a].clone();
                forced_ties += 1;
            }
        }
        let mut vectors = String::new();
        for (i, v) in label_vecs.iter().enumerate() {
            vectors.push_str(&format!("label{i} {}\n", fmt_vec(v)));
        }
        let mut kws: Vec<(Option<Vec<f32>>, f64)> = Vec::new();
        let mut counts: Vec<(String, u64)> = Vec::new();
        for j in 0..n_kw {
            let w = rng.gen_range(1..=20u64);
            let name = format!("kw{j}");
            if rng.gen_bool(0.1) {
                kws.push((None, w as f64));
            } else {
                let v = oracles::random_vector(&mut rng, dim, 0.5, 2.0);
                vectors.push_str(&format!("{name} {}\n", fmt_vec(&v)));
                kws.push((Some(v), w as f64));
            }
            counts.push((name, w));
        }
        if kws.iter().all(|(v, _)| v.is_none()) {
            continue;
        }
        let store = StaticVectorStore::from_reader(vectors.as_bytes(), "case").map_err(|e| e.to_string())?;
        let labels = LabelSet::new((0..n_labels).map(|i| format!("label{i}"))).map_err(|e| e.to_string())?;
        let query = WeightedKeywordQuery::from_counts(counts);
        let got = classify_static(&query, &labels, &store).map_err(|e| format!("case {case}: {e}"))?;
        let (want, best) = oracles::algorithm1(&kws, &label_vecs);
        for (i, ((_, g), w)) in got.table.scores.iter().zip(&want).enumerate() {
            if (g - w).abs() > 1e-9 {
                return Err(format!("case {case}: label{i} scored {g}, oracle {w}"));
            }
        }
        if got.predicted != format!("label{best}") {
            return Err(format!("case {case}: predicted {}, oracle label{best} (scores {want:?})", got.predicted));
        }
    }
    Ok(format!("{ALG1_INSTANCES} instances: scores within 1e-9, best class exact ({forced_ties} forced ties broken by label order)"))
}

fn random_category(rng: &mut ChaCha8Rng) -> String {
    const PARTS: &[&str] = &[
        "American", "films", "of", "the", "1990s", "Indian", "cuisine", "People", "from", "São", "Paulo",
        "English-language", "television", "shows", "(band)", "Nobel", "laureates", "in", "Physics", "rock",
        "music", "groups", "established", "2001", "Zürich", "C++", "software", "and", "McDonald's", "naïve",
        "日本", "anime", "A", "on", "Football", "clubs", "Québec", "e-sports", "x", "I",
    ];
    let n = rng.gen_range(1..=6);
    (0..n).map(|_| *PARTS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Sentence-query and keyword-query properties over random retrieval results.
pub fn reformulation_suite(seed: u64, gpt2: &Gpt2Tokenizer) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nounlite = ExtractorConfig::new(Strategy::NounLite);
    let capital = ExtractorConfig::new(Strategy::Capitalization);
    let mut truncated = 0usize;
    let mut with_dups = 0usize;
    let mut mid_char = 0usize;
    for case in 0..REFORM_CASES {
        let n_articles = rng.gen_range(0..=60);
        let mut articles: Vec<RankedArticle> = (1..=n_articles)
            .map(|rank| {
                let n_cats = rng.gen_range(0..=8);
                RankedArticle {
                    doc_id: format!("d{rank}"),
                    score: 100.0 - rank as f64,
                    rank,
                    categories: (0..n_cats)
                        .map(|_| if rng.gen_bool(0.05) { "  ".to_string() } else { random_category(&mut rng) })
                        .collect(),
                }
            })
            .collect();
        // occasional repeated category across articles
        if n_articles >= 2 && rng.gen_bool(0.5) {
            let c = random_category(&mut rng);
            articles[0].categories.push(c.clone());
            articles[n_articles - 1].categories.push(c);
        }
        articles.shuffle(&mut rng);

        let mut in_order: Vec<&RankedArticle> = articles.iter().collect();
        in_order.sort_by_key(|a| a.rank);
        let expected_cats: Vec<String> = in_order
            .iter()
            .flat_map(|a| a.categories.iter().map(|c| c.trim().to_string()).filter(|c| !c.is_empty()))
            .collect();
        let full = expected_cats.join(" ");
        if expected_cats.len() != expected_cats.iter().collect::<std::collections::HashSet<_>>().len() {
            with_dups += 1;
        }

        let budget = if rng.gen_bool(0.3) { rng.gen_range(1..=64) } else { 512 };
        let sq = make_sentence_query(&articles, gpt2, budget).map_err(|e| e.to_string())?;
        let full_ids = gpt2.encode(&full);
        if sq.token_count > budget {
            return Err(format!("case {case}: {} tokens over budget {budget}", sq.token_count));
        }
        if gpt2.count(&sq.text) != sq.token_count {
            return Err(format!("case {case}: reported {} tokens, text has {}", sq.token_count, gpt2.count(&sq.text)));
        }
        if full_ids.len() <= budget {
            // rank-order grouping with duplicates retained, nothing cut
            if sq.text != full {
                return Err(format!("case {case}: sentence {:?} != rank-ordered join {full:?}", sq.text));
            }
        } else {
            truncated += 1;
            if !full.starts_with(&sq.text) {
                return Err(format!("case {case}: truncated text is not a prefix"));
            }
            // cut at the end of the budget-th token; a token that ends inside a
            // multi-byte character is cut back to the character start
            let end = gpt2.token_spans(&full)[budget - 1].end;
            let mut boundary = end;
            while !full.is_char_boundary(boundary) {
                boundary -= 1;
            }
            if boundary == end {
                if sq.text.len() != end || sq.token_count != budget || gpt2.encode(&sq.text) != full_ids[..budget] {
                    return Err(format!(
                        "case {case}: cut at {} tokens for budget {budget}; text {:?}",
                        sq.token_count, sq.text
                    ));
                }
            } else {
                mid_char += 1;
                if sq.text.len() > boundary {
                    return Err(format!("case {case}: cut past the character boundary"));
                }
            }
        }
        if sq.source_ranks.windows(2).any(|w| w[0] > w[1]) {
            return Err(format!("case {case}: source ranks out of order {:?}", sq.source_ranks));
        }

        for (config, oracle) in [
            (&nounlite, oracles::nounlite_counts as fn(&[String]) -> Vec<(String, u64)>),
            (&capital, oracles::capitalization_counts),
        ] {
            let got = extract_keywords(&expected_cats, config).map_err(|e| e.to_string())?;
            let want = oracle(&expected_cats);
            if got != want {
                return Err(format!("case {case}: {} keywords {got:?}, brute force {want:?}", config.strategy.name()));
            }
        }
    }
    Ok(format!(
        "{REFORM_CASES} cases: rank order, duplicates kept ({with_dups} cases), token budget ({truncated} cut at the exact boundary, {mid_char} inside a multi-byte character), keyword counts match brute force"
    ))
}

/// Remote client against a scripted server that answers in reverse order.
pub fn remote_suite() -> Result<String, String> {
    use qzero_core::embeddings::mock::{MockEmbeddingServer, MockResponse};
    use qzero_core::embeddings::{cosine, EmbeddingError, RemoteEmbedder, RemoteEmbedderConfig, SentenceEmbedder};
    use std::time::Duration;

    let canned = |t: &str| -> Option<Vec<f64>> {
        let n = t.len() as f64;
        Some(vec![n, 1.0 / n, (n * 0.37).sin(), t.bytes().map(f64::from).sum::<f64>() / 100.0])
    };
    let server = MockEmbeddingServer::with_embedder(canned, true).map_err(|e| e.to_string())?;
    let mut cfg = RemoteEmbedderConfig::new(server.url(), "canned");
    cfg.batch_size = 3;
    cfg.max_in_flight = 2;
    let client = RemoteEmbedder::new(cfg).map_err(|e| e.to_string())?;
    let texts: Vec<String> = (1..=10).map(|i| "x".repeat(i) + "yz").collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let got = client.embed(&refs).map_err(|e| e.to_string())?;
    if got.len() != texts.len() {
        return Err(format!("{} vectors for {} texts", got.len(), texts.len()));
    }
    for (t, v) in refs.iter().zip(&got) {
        let want: Vec<f32> = canned(t).unwrap().into_iter().map(|x| x as f32).collect();
        if v.values() != want.as_slice() {
            return Err(format!("vector for {t:?} is not its own: order not restored"));
        }
        let c = cosine(v, v).map_err(|e| e.to_string())?;
        if (c - 1.0).abs() > 1e-12 {
            return Err(format!("cosine(self, self) = {c}"));
        }
    }
    let requests = server.requests().len();

    // mixed dimensions in one response
    let ragged = MockEmbeddingServer::start(|req| {
        let data: Vec<_> = req
            .inputs()
            .iter()
            .enumerate()
            .map(|(i, _)| serde_json::json!({"index": i, "embedding": vec![1.0; i + 1]}))
            .collect();
        MockResponse::json(200, serde_json::json!({ "data": data }))
    })
    .map_err(|e| e.to_string())?;
    let c = RemoteEmbedder::new(RemoteEmbedderConfig::new(ragged.url(), "m")).map_err(|e| e.to_string())?;
    match c.embed(&["a", "b"]) {
        Err(EmbeddingError::Protocol(_)) => {}
        other => return Err(format!("ragged response accepted: {other:?}")),
    }

    // uniform within each batch, different across batches
    let per_batch = MockEmbeddingServer::start(|req| {
        let inputs = req.inputs();
        let dim = if inputs[0] == "a" { 2 } else { 3 };
        let data: Vec<_> = inputs
            .iter()
            .enumerate()
            .map(|(i, _)| serde_json::json!({"index": i, "embedding": vec![1.0; dim]}))
            .collect();
        MockResponse::json(200, serde_json::json!({ "data": data }))
    })
    .map_err(|e| e.to_string())?;
    let mut cfg = RemoteEmbedderConfig::new(per_batch.url(), "m");
    cfg.batch_size = 1;
    cfg.retry_base_delay = Duration::from_millis(1);
    let c = RemoteEmbedder::new(cfg).map_err(|e| e.to_string())?;
    match c.embed(&["a", "b"]) {
        Err(EmbeddingError::Protocol(_)) => {}
        other => return Err(format!("dimension change across batches accepted: {other:?}")),
    }

    Ok(format!(
        "10 texts over {requests} shuffled responses: input order restored, uniform dim enforced, cosine(self, self) = 1 within 1e-12"
    ))
}
