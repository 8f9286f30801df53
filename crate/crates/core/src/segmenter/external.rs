//! Client for a remote generative segmenter, plus a mock server for tests.
//!
//! Wire format (HTTP POST, JSON):
//! request `{"text": "...", "left_context": l, "right_context": r}`,
//! response `{"text": "..."}`. The response should reproduce the window with
//! delimiters inserted. A well-formed response is decoded directly; anything
//! else is salvaged by Levenshtein projection, so the output is always valid.

use std::hash::Hasher;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::align::project_boundaries;
use crate::transcript::{decode_delimited_with, DelimitedText, Delimiter, SegmentationLabels, Transcript};

use super::{SegmentError, WindowSegmenter, WindowView};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout_ms: u64,
    /// Additional attempts after the first failure.
    pub retries: usize,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_ms: u64,
    /// Maximum requests in flight.
    pub concurrency: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8088/segment".into(),
            timeout_ms: 10_000,
            retries: 3,
            backoff_ms: 100,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub text: String,
    pub left_context: usize,
    pub right_context: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub text: String,
}

/// How a window's labels were obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClientStats {
    pub windows: usize,
    pub well_formed: usize,
    pub projected: usize,
    pub fallback: usize,
}

#[derive(Debug)]
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct ExternalClient {
    config: EndpointConfig,
    delimiter: Delimiter,
    agent: ureq::Agent,
    permits: Semaphore,
    fallback: Option<Box<dyn WindowSegmenter>>,
    windows: AtomicUsize,
    well_formed: AtomicUsize,
    projected: AtomicUsize,
    fallbacks: AtomicUsize,
}

impl ExternalClient {
    pub fn new(config: EndpointConfig, delimiter: Delimiter) -> Result<Self, SegmentError> {
        if config.concurrency == 0 {
            return Err(SegmentError::InvalidParameter("endpoint concurrency must be at least 1".into()));
        }
        if config.url.is_empty() {
            return Err(SegmentError::InvalidParameter("endpoint url is empty".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms.max(1))))
            .http_status_as_error(true)
            .build()
            .into();
        Ok(Self {
            permits: Semaphore::new(config.concurrency),
            config,
            delimiter,
            agent,
            fallback: None,
            windows: AtomicUsize::new(0),
            well_formed: AtomicUsize::new(0),
            projected: AtomicUsize::new(0),
            fallbacks: AtomicUsize::new(0),
        })
    }

    /// Local segmenter used when the endpoint keeps failing.
    pub fn with_fallback(mut self, fallback: Box<dyn WindowSegmenter>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn stats(&self) -> ClientStats {
        ClientStats {
            windows: self.windows.load(Ordering::Relaxed),
            well_formed: self.well_formed.load(Ordering::Relaxed),
            projected: self.projected.load(Ordering::Relaxed),
            fallback: self.fallbacks.load(Ordering::Relaxed),
        }
    }

    /// One request, no retries.
    pub fn request(&self, req: &SegmentRequest) -> Result<String, String> {
        let _permit = self.permits.acquire();
        let resp = self.agent.post(&self.config.url).send_json(req).map_err(|e| e.to_string())?;
        let body: SegmentResponse = resp.into_body().read_json().map_err(|e| e.to_string())?;
        Ok(body.text)
    }

    /// Labels from generated text: strict decoding, else projection.
    pub fn labels_from_response(&self, window: &Transcript, generated: &str) -> SegmentationLabels {
        match decode_delimited_with(generated, window, &self.delimiter) {
            Ok(labels) => {
                self.well_formed.fetch_add(1, Ordering::Relaxed);
                labels
            }
            Err(malformed) => {
                log::debug!("malformed endpoint output ({malformed:?}); projecting");
                self.projected.fetch_add(1, Ordering::Relaxed);
                project_boundaries(window, &DelimitedText::parse_lenient(generated, &self.delimiter))
            }
        }
    }
}

impl WindowSegmenter for ExternalClient {
    fn segment(&self, window: &WindowView<'_>) -> Result<SegmentationLabels, SegmentError> {
        if window.is_empty() {
            return Ok(SegmentationLabels::single_segment(0));
        }
        self.windows.fetch_add(1, Ordering::Relaxed);
        let transcript = Transcript::with_delimiter("window", window.tokens.to_vec(), &self.delimiter)?;
        let req = SegmentRequest {
            text: transcript.text(),
            left_context: window.left_context(),
            right_context: window.right_context(),
        };
        let attempts = self.config.retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.request(&req) {
                Ok(text) => return Ok(self.labels_from_response(&transcript, &text)),
                Err(e) => {
                    log::warn!("endpoint attempt {}/{attempts} failed: {e}", attempt + 1);
                    last_error = e;
                }
            }
        }
        match &self.fallback {
            Some(fb) => {
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                log::warn!("endpoint unavailable; using fallback segmenter {}", fb.name());
                fb.segment(window)
            }
            None => Err(SegmentError::Endpoint {
                attempts,
                message: last_error,
            }),
        }
    }

    fn name(&self) -> &str {
        "external"
    }
}

/// Behaviour of the mock endpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum MockMode {
    /// Returns the input unchanged.
    Echo,
    /// Inserts a delimiter after every occurrence of a trigger word.
    Rule { triggers: Vec<String> },
    /// Rule output, then random substitutions, deletions, insertions and
    /// stray delimiters at the given rate. Seeded by the request text.
    Corrupt { triggers: Vec<String>, rate: f64, seed: u64 },
    /// Arbitrary output: empty strings, garbage, delimiter spam.
    Garbage { seed: u64 },
    /// Fails the first `n` requests with HTTP 503, then echoes.
    FailFirst(usize),
    /// Always fails with HTTP 503.
    Down,
}

impl MockMode {
    fn rule(tokens: &[&str], triggers: &[String], delim: &str) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len() * 2);
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 && triggers.iter().any(|w| w == tokens[i - 1]) {
                out.push(delim.to_string());
            }
            out.push(t.to_string());
        }
        out
    }

    /// The generated text for `input`.
    pub fn respond(&self, input: &str, delim: &str) -> String {
        let tokens: Vec<&str> = input.split_whitespace().collect();
        let mut h = XxHash64::with_seed(0);
        h.write(input.as_bytes());
        match self {
            MockMode::Echo | MockMode::FailFirst(_) | MockMode::Down => input.to_string(),
            MockMode::Rule { triggers } => Self::rule(&tokens, triggers, delim).join(" "),
            MockMode::Corrupt { triggers, rate, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ h.finish());
                let mut out = Vec::new();
                for tok in Self::rule(&tokens, triggers, delim) {
                    if !rng.random_bool(rate.clamp(0.0, 1.0)) {
                        out.push(tok);
                        continue;
                    }
                    match rng.random_range(0..4) {
                        0 => out.push(format!("{tok}x")),
                        1 => {}
                        2 => {
                            out.push(tok);
                            out.push("uh".into());
                        }
                        _ => {
                            out.push(delim.to_string());
                            out.push(tok);
                        }
                    }
                }
                out.join(" ")
            }
            MockMode::Garbage { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ h.finish());
                match rng.random_range(0..5) {
                    0 => String::new(),
                    1 => vec![delim; rng.random_range(1..20)].join(" "),
                    2 => format!("{delim}{}{delim}", tokens.join(delim)),
                    3 => (0..rng.random_range(0..30))
                        .map(|_| ["zz", "q", delim, "the"][rng.random_range(0..4)])
                        .collect::<Vec<_>>()
                        .join(" "),
                    _ => tokens.iter().rev().copied().collect::<Vec<_>>().join(" "),
                }
            }
        }
    }
}

/// A local HTTP server implementing the endpoint protocol.
pub struct MockEndpoint {
    server: Arc<tiny_http::Server>,
    port: u16,
    handle: Option<JoinHandle<()>>,
    requests: Arc<AtomicUsize>,
}

impl MockEndpoint {
    /// Binds to `addr` (use port 0 for an ephemeral port) and serves in a
    /// background thread.
    pub fn start(addr: &str, mode: MockMode, delimiter: Delimiter) -> std::io::Result<Self> {
        let server = tiny_http::Server::http(addr).map_err(std::io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let server = Arc::new(server);
        let requests = Arc::new(AtomicUsize::new(0));
        let handle = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    let n = requests.fetch_add(1, Ordering::SeqCst);
                    handle_request(request, &mode, delimiter.as_str(), n);
                }
            })
        };
        Ok(Self {
            server,
            port,
            handle: Some(handle),
            requests,
        })
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}/segment", self.port)
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Blocks until the server thread exits (it only does on shutdown).
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn handle_request(mut request: tiny_http::Request, mode: &MockMode, delim: &str, n: usize) {
    let fail = match mode {
        MockMode::Down => true,
        MockMode::FailFirst(k) => n < *k,
        _ => false,
    };
    let json = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
    let response = if fail {
        tiny_http::Response::from_string("{\"error\":\"unavailable\"}").with_status_code(503)
    } else {
        let mut body = String::new();
        match request
            .as_reader()
            .read_to_string(&mut body)
            .map_err(|e| e.to_string())
            .and_then(|_| serde_json::from_str::<SegmentRequest>(&body).map_err(|e| e.to_string()))
        {
            Ok(req) => {
                let text = mode.respond(&req.text, delim);
                let out = serde_json::to_string(&SegmentResponse { text }).expect("serializable");
                tiny_http::Response::from_string(out)
            }
            Err(e) => tiny_http::Response::from_string(format!("{{\"error\":{:?}}}", e)).with_status_code(400),
        }
    };
    let _ = request.respond(response.with_header(json));
}
