//! Local stand-in for the scoring service, serving deterministic scores over
//! plain HTTP on a loopback port.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::Attribute;
use crate::error::{Error, Result};
use crate::synthetic::{PROFANITY, SLURS, THREATS};

#[derive(Debug, Clone, Default)]
pub struct MockConfig {
    /// Texts containing any keyword score high for that attribute.
    pub keywords: BTreeMap<Attribute, Vec<String>>,
    /// Canned scores for exact texts.
    pub overrides: BTreeMap<String, BTreeMap<Attribute, f64>>,
    /// Attributes left out of every response.
    pub omit: Vec<Attribute>,
    /// Statuses returned, in order, before any successful response.
    pub failures: Vec<u16>,
}

impl MockConfig {
    /// Keywords matching the planted signals of the synthetic corpus.
    pub fn synthetic() -> Self {
        let list = |groups: &[&[&str]]| groups.iter().flat_map(|g| g.iter().map(|s| s.to_string())).collect();
        let keywords = BTreeMap::from([
            (Attribute::IdentityAttack, list(&[SLURS])),
            (Attribute::Insult, list(&[SLURS, THREATS])),
            (Attribute::Obscene, list(&[PROFANITY])),
            (Attribute::Profanity, list(&[PROFANITY])),
            (Attribute::SevereToxicity, list(&[SLURS])),
            (Attribute::SexuallyExplicit, Vec::new()),
            (Attribute::Threat, list(&[THREATS])),
            (Attribute::Toxicity, list(&[PROFANITY, SLURS, THREATS])),
            (Attribute::ToxicityFast, list(&[PROFANITY, SLURS, THREATS])),
        ]);
        MockConfig {
            keywords,
            ..MockConfig::default()
        }
    }

    /// Score in `[0, 1)`: a keyword hit lands in `[0.85, 0.95)`, anything else
    /// in `[0.02, 0.12)`, with a text-dependent offset.
    pub fn score(&self, text: &str, attribute: Attribute) -> f64 {
        if let Some(v) = self.overrides.get(text).and_then(|m| m.get(&attribute)) {
            return *v;
        }
        let lower = text.to_lowercase();
        let hit = self
            .keywords
            .get(&attribute)
            .is_some_and(|ks| ks.iter().any(|k| lower.contains(k.as_str())));
        let digest = Sha256::new()
            .chain_update(attribute.api_name())
            .chain_update([0u8])
            .chain_update(text)
            .finalize();
        let bits = u64::from_le_bytes(digest[..8].try_into().unwrap());
        let jitter = (bits >> 11) as f64 / (1u64 << 53) as f64 * 0.1;
        if hit {
            0.85 + jitter
        } else {
            0.02 + jitter
        }
    }
}

struct Shared {
    config: MockConfig,
    failures: Mutex<VecDeque<u16>>,
    requests: AtomicU64,
    stop: AtomicBool,
}

/// Serves `POST /v1alpha1/comments:analyze` until dropped.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(config: MockConfig) -> Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| Error::Network(e.to_string()))?;
        let addr = listener.local_addr().map_err(|e| Error::Network(e.to_string()))?;
        let shared = Arc::new(Shared {
            failures: Mutex::new(config.failures.iter().copied().collect()),
            config,
            requests: AtomicU64::new(0),
            stop: AtomicBool::new(false),
        });
        let worker = Arc::clone(&shared);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if worker.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let shared = Arc::clone(&worker);
                std::thread::spawn(move || {
                    if let Err(e) = handle_connection(stream, &shared) {
                        log::debug!("mock connection error: {e}");
                    }
                });
            }
        });
        Ok(MockServer {
            addr,
            shared,
            handle: Some(handle),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received, including failed ones.
    pub fn requests(&self) -> u64 {
        self.shared.requests.load(Ordering::SeqCst)
    }

    /// Queues statuses to return before the next successful response.
    pub fn push_failures(&self, statuses: &[u16]) {
        self.shared.failures.lock().unwrap().extend(statuses);
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn respond(stream: &mut TcpStream, status: u16, body: &Value) -> std::io::Result<()> {
    let text = body.to_string();
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        429 => "Too Many Requests",
        _ => "Error",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    )?;
    stream.flush()
}

fn handle_connection(mut stream: TcpStream, shared: &Shared) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 || shared.stop.load(Ordering::SeqCst) {
        return Ok(());
    }
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line.trim().is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    shared.requests.fetch_add(1, Ordering::SeqCst);

    let path = request_line.split_whitespace().nth(1).unwrap_or("");
    if !path.starts_with("/v1alpha1/comments:analyze") {
        return respond(&mut stream, 404, &json!({"error": "not found"}));
    }
    if let Some(status) = shared.failures.lock().unwrap().pop_front() {
        return respond(&mut stream, status, &json!({"error": {"code": status}}));
    }
    let Ok(request) = serde_json::from_slice::<Value>(&body) else {
        return respond(&mut stream, 400, &json!({"error": "malformed body"}));
    };
    let text = request.pointer("/comment/text").and_then(Value::as_str).unwrap_or("");
    if request["languages"].as_array().is_some_and(|l| l.iter().any(|v| v == "hi")) {
        return respond(&mut stream, 400, &json!({"error": "language not supported"}));
    }
    let mut scores = serde_json::Map::new();
    if let Some(requested) = request["requestedAttributes"].as_object() {
        for name in requested.keys() {
            let Ok(attribute) = name.parse::<Attribute>() else { continue };
            if shared.config.omit.contains(&attribute) {
                continue;
            }
            let value = shared.config.score(text, attribute);
            scores.insert(
                attribute.api_name().into(),
                json!({"summaryScore": {"value": value, "type": "PROBABILITY"}}),
            );
        }
    }
    respond(&mut stream, 200, &json!({"attributeScores": scores, "languages": request["languages"]}))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_scores() {
        let c = MockConfig::synthetic();
        let hit = c.score("you are bloody late", Attribute::Profanity);
        let miss = c.score("you are late", Attribute::Profanity);
        assert!((0.85..0.95).contains(&hit) && (0.02..0.12).contains(&miss));
        assert_eq!(hit, c.score("you are bloody late", Attribute::Profanity));
        assert!(c.score("bloody", Attribute::SexuallyExplicit) < 0.2);
    }
}
