//! HTTP client for the comment-analysis endpoint with retries, exponential
//! backoff and a request-rate ceiling.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{language_attributes, Attribute, PerspectiveScores, Scorer, Variant};
use crate::error::{Error, Result};
use crate::ingest::Language;

pub const LIVE_BASE_URL: &str = "https://commentanalyzer.googleapis.com";
pub const API_KEY_ENV: &str = "PERSPECTIVE_API_KEY";

/// Time source for backoff and rate limiting.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, duration: Duration);
}

pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { start: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Virtual clock: `sleep` advances time instantly and records the request.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
    sleeps: Mutex<Vec<Duration>>,
}

impl ManualClock {
    pub fn sleeps(&self) -> Vec<Duration> {
        self.sleeps.lock().unwrap().clone()
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().unwrap() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, duration: Duration) {
        self.sleeps.lock().unwrap().push(duration);
        self.advance(duration);
    }
}

/// Token bucket of capacity one: consecutive requests are spaced at least
/// `1 / rate` seconds apart.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    interval: Duration,
    next: Option<Duration>,
}

impl RateLimiter {
    /// `rate` in requests per second; zero or less disables the limit.
    pub fn new(rate: f64) -> Self {
        let interval = if rate > 0.0 {
            Duration::from_secs_f64(1.0 / rate)
        } else {
            Duration::ZERO
        };
        RateLimiter { interval, next: None }
    }

    /// Claims the next slot and returns how long the caller must wait for it.
    pub fn reserve(&mut self, now: Duration) -> Duration {
        let slot = self.next.map_or(now, |n| n.max(now));
        self.next = Some(slot + self.interval);
        slot - now
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    /// Requests per second.
    pub rate_limit: f64,
    pub max_tries: u32,
    pub backoff_base: Duration,
    pub backoff_factor: u32,
    pub timeout: Duration,
    /// Concurrent requests used by [`PerspectiveClient::score_batch`].
    pub in_flight: usize,
}

impl ClientConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        ClientConfig {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: None,
            rate_limit: 1.0,
            max_tries: 5,
            backoff_base: Duration::from_secs(1),
            backoff_factor: 2,
            timeout: Duration::from_secs(30),
            in_flight: 1,
        }
    }

    /// The public endpoint, keyed from the environment.
    pub fn live() -> Result<Self> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| Error::Config(format!("{API_KEY_ENV} is not set")))?;
        Ok(ClientConfig {
            api_key: Some(key),
            ..ClientConfig::new(LIVE_BASE_URL)
        })
    }

    fn is_loopback(&self) -> bool {
        let rest = self.base_url.split("://").nth(1).unwrap_or(&self.base_url);
        rest.starts_with("127.") || rest.starts_with("localhost") || rest.starts_with("[::1]")
    }

    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        self.backoff_base * self.backoff_factor.pow(retry - 1)
    }
}

pub struct PerspectiveClient {
    config: ClientConfig,
    agent: ureq::Agent,
    clock: Arc<dyn Clock>,
    limiter: Mutex<RateLimiter>,
    requests: AtomicU64,
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl PerspectiveClient {
    pub fn new(config: ClientConfig) -> Self {
        PerspectiveClient::with_clock(config, Arc::new(SystemClock::default()))
    }

    pub fn with_clock(config: ClientConfig, clock: Arc<dyn Clock>) -> Self {
        let mut builder = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout));
        if config.is_loopback() {
            builder = builder.proxy(None);
        }
        PerspectiveClient {
            agent: builder.build().into(),
            limiter: Mutex::new(RateLimiter::new(config.rate_limit)),
            config,
            clock,
            requests: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// HTTP requests sent so far, retries included.
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    fn url(&self) -> String {
        let mut url = format!("{}/v1alpha1/comments:analyze", self.config.base_url);
        if let Some(key) = &self.config.api_key {
            url.push_str("?key=");
            url.push_str(key);
        }
        url
    }

    fn wait_for_slot(&self) {
        let wait = self.limiter.lock().unwrap().reserve(self.clock.now());
        if !wait.is_zero() {
            self.clock.sleep(wait);
        }
    }

    /// One outcome per attempt: the status and parsed body, or a transport error.
    fn send(&self, body: &Value) -> std::result::Result<(u16, Option<Value>), String> {
        self.wait_for_slot();
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut resp = self.agent.post(&self.url()).send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let parsed = if (200..300).contains(&status) {
            Some(resp.body_mut().read_json::<Value>().map_err(|e| e.to_string())?)
        } else {
            None
        };
        Ok((status, parsed))
    }

    /// Scores `text` for `attributes`. Rate-limit and server errors are
    /// retried with exponential backoff up to `max_tries` attempts in total.
    /// Blank text is scored 0 everywhere without a request.
    pub fn score_text(&self, text: &str, language: Language, attributes: &[Attribute]) -> Result<PerspectiveScores> {
        let supported = language_attributes(language)?;
        if let Some(a) = attributes.iter().find(|a| !supported.contains(a)) {
            return Err(Error::Config(format!("{a} is not available for {language}")));
        }
        if text.trim().is_empty() {
            return PerspectiveScores::new(attributes.iter().map(|&a| (a, 0.0)).collect());
        }
        let requested: serde_json::Map<String, Value> =
            attributes.iter().map(|a| (a.api_name().to_string(), json!({}))).collect();
        let body = json!({
            "comment": {"text": text},
            "languages": [language.as_str()],
            "requestedAttributes": requested,
        });
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = self.send(&body);
            let retry_error = match outcome {
                Ok((status, Some(json))) if (200..300).contains(&status) => return parse_scores(&json, attributes),
                Ok((status, _)) if retryable(status) => Error::Http {
                    status,
                    attempts: attempt,
                },
                Ok((status, _)) => {
                    return Err(Error::Http {
                        status,
                        attempts: attempt,
                    })
                }
                Err(message) => Error::Network(message),
            };
            if attempt >= self.config.max_tries {
                return Err(retry_error);
            }
            log::warn!("scoring request failed ({retry_error}); retrying");
            self.clock.sleep(self.config.backoff(attempt));
        }
    }

    /// Scores many texts with up to `in_flight` concurrent requests sharing
    /// the rate limiter. Results keep the input order.
    pub fn score_batch<S: AsRef<str> + Sync>(
        &self,
        texts: &[S],
        language: Language,
        attributes: &[Attribute],
    ) -> Vec<Result<PerspectiveScores>> {
        let workers = self.config.in_flight.clamp(1, texts.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<PerspectiveScores>>>> = texts.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= texts.len() {
                        break;
                    }
                    let r = self.score_text(texts[i].as_ref(), language, attributes);
                    *slots[i].lock().unwrap() = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every slot filled"))
            .collect()
    }
}

fn parse_scores(json: &Value, attributes: &[Attribute]) -> Result<PerspectiveScores> {
    let scores = attributes
        .iter()
        .map(|&a| {
            json.pointer(&format!("/attributeScores/{}/summaryScore/value", a.api_name()))
                .and_then(Value::as_f64)
                .map(|v| (a, v))
                .ok_or_else(|| Error::MissingAttribute(a.api_name().into()))
        })
        .collect::<Result<_>>()?;
    PerspectiveScores::new(scores)
}

impl Scorer for PerspectiveClient {
    fn score(&self, text: &str, language: Language, _variant: Variant) -> Result<PerspectiveScores> {
        self.score_text(text, language, &language_attributes(language)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let c = ClientConfig::new("http://127.0.0.1:1/");
        let delays: Vec<u64> = (1..5).map(|r| c.backoff(r).as_secs()).collect();
        assert_eq!(delays, [1, 2, 4, 8]);
        assert_eq!(c.base_url, "http://127.0.0.1:1");
        assert!(c.is_loopback());
        assert!(!ClientConfig::new(LIVE_BASE_URL).is_loopback());
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let mut r = RateLimiter::new(2.0);
        let t = Duration::from_secs(10);
        assert_eq!(r.reserve(t), Duration::ZERO);
        assert_eq!(r.reserve(t), Duration::from_millis(500));
        assert_eq!(r.reserve(t), Duration::from_millis(1000));
        assert_eq!(r.reserve(t + Duration::from_secs(5)), Duration::ZERO);
        let mut off = RateLimiter::new(0.0);
        assert_eq!(off.reserve(t), Duration::ZERO);
        assert_eq!(off.reserve(t), Duration::ZERO);
    }

    #[test]
    fn parse_reports_missing_attribute() {
        let body = json!({"attributeScores": {"TOXICITY": {"summaryScore": {"value": 0.91}}}});
        let s = parse_scores(&body, &[Attribute::Toxicity]).unwrap();
        assert_eq!(s.get(Attribute::Toxicity).unwrap(), 0.91);
        let err = parse_scores(&body, &[Attribute::Toxicity, Attribute::Insult]).unwrap_err();
        assert!(err.to_string().contains("INSULT"));
    }

    #[test]
    fn blank_text_and_hindi_need_no_request() {
        let client = PerspectiveClient::new(ClientConfig::new("http://127.0.0.1:9"));
        let s = client.score_text("  ", Language::De, &Attribute::COMMON).unwrap();
        assert!(s.0.values().all(|&v| v == 0.0));
        assert!(matches!(
            client.score_text("hallo", Language::Hi, &[Attribute::Toxicity]),
            Err(Error::UnsupportedLanguage(_))
        ));
        assert!(client.score_text("hallo", Language::De, &[Attribute::Obscene]).is_err());
        assert_eq!(client.requests(), 0);
    }
}
