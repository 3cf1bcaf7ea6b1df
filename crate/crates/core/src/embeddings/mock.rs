//! A scripted in-process HTTP server speaking the embeddings wire protocol.
//! Test support only; enabled with the `mock-server` feature.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

#[derive(Debug, Clone)]
pub struct MockRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl MockRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> Option<serde_json::Value> {
        serde_json::from_slice(&self.body).ok()
    }

    /// The `input` array of an embeddings request.
    pub fn inputs(&self) -> Vec<String> {
        self.json()
            .and_then(|v| v.get("input").cloned())
            .and_then(|v| serde_json::from_value(v).ok())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct MockResponse {
    pub status: u16,
    pub body: String,
}

impl MockResponse {
    pub fn json(status: u16, value: serde_json::Value) -> Self {
        MockResponse {
            status,
            body: value.to_string(),
        }
    }
}

type Handler = dyn Fn(&MockRequest) -> MockResponse + Send + Sync;

pub struct MockEmbeddingServer {
    addr: SocketAddr,
    requests: Arc<Mutex<Vec<MockRequest>>>,
    shutdown: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl MockEmbeddingServer {
    /// Serves every request with `handler` on an ephemeral localhost port.
    pub fn start<F>(handler: F) -> io::Result<Self>
    where
        F: Fn(&MockRequest) -> MockResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let requests = Arc::new(Mutex::new(Vec::new()));
        let shutdown = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);

        let (reqs, stop) = (requests.clone(), shutdown.clone());
        let accept = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let (handler, reqs) = (handler.clone(), reqs.clone());
                std::thread::spawn(move || {
                    let _ = serve(stream, &*handler, &reqs);
                });
            }
        });
        Ok(MockEmbeddingServer {
            addr,
            requests,
            shutdown,
            accept: Some(accept),
        })
    }

    /// Answers embeddings requests with `embed(text)`; unknown or empty
    /// texts get a 400. With `shuffle`, `data` entries are returned in
    /// reverse order so clients must honor the `index` field.
    pub fn with_embedder<F>(embed: F, shuffle: bool) -> io::Result<Self>
    where
        F: Fn(&str) -> Option<Vec<f64>> + Send + Sync + 'static,
    {
        Self::start(move |req| {
            if req.method != "POST" || req.path != "/v1/embeddings" {
                return MockResponse::json(404, serde_json::json!({"error": "not found"}));
            }
            let Some(body) = req.json() else {
                return MockResponse::json(400, serde_json::json!({"error": "invalid JSON"}));
            };
            let Some(inputs) = body.get("input").and_then(|v| v.as_array()) else {
                return MockResponse::json(400, serde_json::json!({"error": "missing input"}));
            };
            let mut data = Vec::new();
            for (i, text) in inputs.iter().enumerate() {
                let text = text.as_str().unwrap_or("");
                if text.is_empty() {
                    return MockResponse::json(400, serde_json::json!({"error": format!("input {i} is empty")}));
                }
                let Some(v) = embed(text) else {
                    return MockResponse::json(400, serde_json::json!({"error": format!("unknown text {text:?}")}));
                };
                data.push(serde_json::json!({"object": "embedding", "index": i, "embedding": v}));
            }
            if shuffle {
                data.reverse();
            }
            MockResponse::json(
                200,
                serde_json::json!({"object": "list", "model": body.get("model"), "data": data, "usage": {"prompt_tokens": 0}}),
            )
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<MockRequest> {
        self.requests.lock().expect("request log").clone()
    }
}

impl Drop for MockEmbeddingServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<MockRequest>>) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    if method.is_empty() {
        return Ok(());
    }

    let mut headers = Vec::new();
    let mut content_length = 0usize;
    loop {
        line.clear();
        reader.read_line(&mut line)?;
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.parse().unwrap_or(0);
            }
            headers.push((k, v));
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let req = MockRequest {
        method,
        path,
        headers,
        body,
    };
    let resp = handler(&req);
    log.lock().expect("request log").push(req);

    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} Mock\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        resp.status,
        resp.body.len(),
        resp.body
    )?;
    stream.flush()
}
