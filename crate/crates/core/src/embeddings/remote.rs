//! Blocking client for `POST {base_url}/v1/embeddings`.
//!
//! Request: `{"model": "...", "input": ["...", ...]}`, optional bearer token.
//! Response: `{"data": [{"index": i, "embedding": [...]}, ...]}`; entries may
//! arrive in any order and unknown fields are ignored.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingVector, SentenceEmbedder};

/// Environment variable read by the CLI for the bearer token.
pub const AUTH_TOKEN_ENV: &str = "QZERO_EMBEDDINGS_TOKEN";

#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    pub base_url: String,
    pub model_name: String,
    pub timeout: Duration,
    /// Upper bound on concurrent requests.
    pub max_in_flight: usize,
    pub auth_token: Option<String>,
    /// Texts per request.
    pub batch_size: usize,
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    /// Delay before the first retry; doubled for each later one.
    pub retry_base_delay: Duration,
}

impl RemoteEmbedderConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        RemoteEmbedderConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            timeout: Duration::from_secs(60),
            max_in_flight: 4,
            auth_token: None,
            batch_size: 64,
            max_attempts: 3,
            retry_base_delay: Duration::from_millis(200),
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct Response {
    data: Vec<Item>,
}

#[derive(Deserialize)]
struct Item {
    index: usize,
    embedding: Vec<f64>,
}

pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    client: reqwest::blocking::Client,
    endpoint: String,
}

impl std::fmt::Debug for RemoteEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEmbedder")
            .field("endpoint", &self.endpoint)
            .field("model", &self.config.model_name)
            .finish()
    }
}

type BatchResult = Result<Vec<EmbeddingVector>, EmbeddingError>;

enum Failure {
    Retryable(String),
    Fatal(EmbeddingError),
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Result<Self, EmbeddingError> {
        if config.max_in_flight == 0 || config.batch_size == 0 || config.max_attempts == 0 {
            return Err(EmbeddingError::Contract(
                "max_in_flight, batch_size and max_attempts must be >= 1".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| EmbeddingError::Contract(format!("cannot build HTTP client: {e}")))?;
        let endpoint = format!("{}/v1/embeddings", config.base_url.trim_end_matches('/'));
        Ok(RemoteEmbedder {
            config,
            client,
            endpoint,
        })
    }

    pub fn config(&self) -> &RemoteEmbedderConfig {
        &self.config
    }

    fn send_once(&self, batch: &[&str]) -> Result<Vec<EmbeddingVector>, Failure> {
        let mut req = self.client.post(&self.endpoint).json(&Request {
            model: &self.config.model_name,
            input: batch,
        });
        if let Some(token) = &self.config.auth_token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(Failure::Retryable(format!("server error {status}")));
        }
        let body = resp.bytes().map_err(|e| Failure::Retryable(e.to_string()))?;
        if !status.is_success() {
            return Err(Failure::Fatal(EmbeddingError::Rejected {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&body).into_owned(),
            }));
        }
        let parsed: Response = serde_json::from_slice(&body)
            .map_err(|e| Failure::Fatal(EmbeddingError::Protocol(e.to_string())))?;
        reorder(parsed, batch.len()).map_err(Failure::Fatal)
    }

    fn send_with_retry(&self, batch: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let mut delay = self.config.retry_base_delay;
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts {
            match self.send_once(batch) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(msg)) => {
                    log::warn!("embedding request attempt {attempt} failed: {msg}");
                    last = msg;
                    if attempt < self.config.max_attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(EmbeddingError::Transport {
            attempts: self.config.max_attempts,
            message: last,
        })
    }

    /// Embeds `texts`, batching and parallelizing transparently.
    /// The output has one vector per input, in input order, all of one dimension.
    pub fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.is_empty() {
            return Err(EmbeddingError::Contract("no texts to embed".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(EmbeddingError::Contract(format!("text {i} is empty")));
        }
        let batches: Vec<&[&str]> = texts.chunks(self.config.batch_size).collect();
        let slots: Vec<Mutex<Option<BatchResult>>> = batches.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.min(batches.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= batches.len() {
                        break;
                    }
                    let r = self.send_with_retry(batches[i]);
                    let failed = r.is_err();
                    *slots[i].lock().expect("slot lock") = Some(r);
                    if failed {
                        // stop handing out work; remaining slots stay empty
                        next.store(batches.len(), Ordering::Relaxed);
                    }
                });
            }
        });

        let mut out = Vec::with_capacity(texts.len());
        for slot in slots {
            match slot.into_inner().expect("slot lock") {
                Some(Ok(vs)) => out.extend(vs),
                Some(Err(e)) => return Err(e),
                None => continue,
            }
        }
        if out.len() != texts.len() {
            return Err(EmbeddingError::Protocol("a batch was not completed".into()));
        }
        let dim = out[0].dim();
        if out.iter().any(|v| v.dim() != dim) {
            return Err(EmbeddingError::Protocol("embeddings differ in dimension".into()));
        }
        Ok(out)
    }
}

/// Puts response entries back in input order and validates the shape.
fn reorder(resp: Response, n: usize) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    if resp.data.len() != n {
        return Err(EmbeddingError::Protocol(format!(
            "expected {n} embeddings, got {}",
            resp.data.len()
        )));
    }
    let mut slots: Vec<Option<EmbeddingVector>> = vec![None; n];
    let mut dim = None;
    for item in resp.data {
        if item.index >= n {
            return Err(EmbeddingError::Protocol(format!("index {} out of range", item.index)));
        }
        if slots[item.index].is_some() {
            return Err(EmbeddingError::Protocol(format!("index {} repeated", item.index)));
        }
        if *dim.get_or_insert(item.embedding.len()) != item.embedding.len() {
            return Err(EmbeddingError::Protocol("embeddings differ in dimension".into()));
        }
        let v = EmbeddingVector::new(item.embedding.into_iter().map(|x| x as f32).collect())
            .map_err(|e| EmbeddingError::Protocol(e.to_string()))?;
        slots[item.index] = Some(v);
    }
    Ok(slots.into_iter().map(|s| s.expect("all indices present")).collect())
}

impl SentenceEmbedder for RemoteEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        self.embed_texts(texts)
    }

    fn describe(&self) -> String {
        format!("remote({},{})", self.endpoint, self.config.model_name)
    }
}
