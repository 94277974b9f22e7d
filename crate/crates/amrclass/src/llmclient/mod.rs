//! Prompt dispatch to pluggable generation backends with caching, retries,
//! and bounded concurrency.
//!
//! Backends: a generic chat-style HTTP endpoint (see [`http`]) and a
//! deterministic rule-table mock (see [`mock`]). Replies are cached by a
//! content digest of (prompt, model, temperature, max tokens); a batch rerun
//! against a warm cache makes zero network calls. The API secret is read
//! from a named environment variable at request time and never stored.

mod cache;
mod http;
mod mock;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::promptgen::PromptJob;

pub use cache::{CacheEntry, ResponseCache};
pub use http::{
    retryable_status, AdapterDescriptor, ReqwestTransport, Transport, TransportResponse,
};
pub use mock::{MockRule, MockRules};

pub type Result<T> = std::result::Result<T, LlmError>;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("backend timed out")]
    BackendTimeout,
    #[error("backend rejected the request: status {status}: {detail}")]
    BackendRejected { status: u16, detail: String },
    #[error("rate limited: status {status}")]
    RateLimited { status: u16 },
    #[error("retries exhausted after {attempts} attempt(s): {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("secret env var {0} is not set")]
    MissingSecret(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unusable response: {0}")]
    BadResponse(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl LlmError {
    fn cache_io(e: std::io::Error) -> LlmError {
        LlmError::Cache(e.to_string())
    }

    /// Transient failures worth another attempt.
    fn is_retryable(&self) -> bool {
        matches!(
            self,
            LlmError::BackendTimeout | LlmError::RateLimited { .. } | LlmError::Transport(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    #[serde(rename = "HTTP_CHAT")]
    HttpChat,
    #[serde(rename = "MOCK")]
    Mock,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::HttpChat => "HTTP_CHAT",
            BackendKind::Mock => "MOCK",
        }
    }
}

/// Backend selection and request knobs. `auth_env` names the environment
/// variable holding the API secret; the secret value itself never appears in
/// configs, caches, logs, or reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub auth_env: Option<String>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// Base backoff delay; production default is one second.
    pub retry_base_ms: u64,
    /// Rule table for the mock backend.
    pub mock_rules: Option<PathBuf>,
    /// Adapter descriptor for the HTTP backend; omitted means the default
    /// chat-completions dialect.
    pub adapter: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint_url: None,
            model_name: "mock-model".into(),
            auth_env: None,
            temperature: 0.0,
            max_output_tokens: 512,
            timeout_secs: 60,
            max_retries: 3,
            max_in_flight: 4,
            retry_base_ms: 1000,
            mock_rules: None,
            adapter: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(LlmError::Config("temperature must be >= 0".into()));
        }
        if self.max_in_flight < 1 {
            return Err(LlmError::Config("max_in_flight must be >= 1".into()));
        }
        if self.kind == BackendKind::HttpChat && self.endpoint_url.is_none() {
            return Err(LlmError::Config("HTTP backend needs endpoint_url".into()));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> BackendFingerprint {
        BackendFingerprint {
            kind: self.kind.as_str().to_string(),
            model_name: self.model_name.clone(),
            temperature: self.temperature,
        }
    }
}

/// What identifies a backend in reports and prediction provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendFingerprint {
    pub kind: String,
    pub model_name: String,
    pub temperature: f64,
}

/// Verbatim model output bound to its job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReply {
    pub job_id: String,
    pub raw_text: String,
    pub backend: BackendFingerprint,
    pub latency_ms: u64,
    pub cached: bool,
}

/// A per-job failure inside a batch; the batch itself never aborts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub job_id: String,
    pub error: String,
}

/// Digest identifying one completion request. The job id is deliberately not
/// part of the key: identical prompts share cache entries.
pub fn cache_key(prompt: &str, model: &str, temperature: f64, max_tokens: u32) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hasher.update([0]);
    hasher.update(model.as_bytes());
    hasher.update([0]);
    hasher.update(format!("{temperature:?}").as_bytes());
    hasher.update([0]);
    hasher.update(max_tokens.to_le_bytes());
    hex::encode(hasher.finalize())
}

enum Backend {
    Mock(MockRules),
    Http {
        transport: Box<dyn Transport>,
        adapter: AdapterDescriptor,
        url: String,
    },
}

pub struct LlmClient {
    cfg: BackendConfig,
    backend: Backend,
}

impl LlmClient {
    pub fn new(cfg: BackendConfig) -> Result<LlmClient> {
        cfg.validate()?;
        let backend = match cfg.kind {
            BackendKind::Mock => {
                let rules = match &cfg.mock_rules {
                    Some(path) => MockRules::from_path(path)?,
                    None => MockRules::default(),
                };
                Backend::Mock(rules)
            }
            BackendKind::HttpChat => Backend::Http {
                transport: Box::new(ReqwestTransport::new()?),
                adapter: match &cfg.adapter {
                    Some(path) => AdapterDescriptor::from_path(path)?,
                    None => AdapterDescriptor::default(),
                },
                url: cfg.endpoint_url.clone().expect("validated above"),
            },
        };
        Ok(LlmClient { cfg, backend })
    }

    /// Like [`LlmClient::new`] but with an injected transport; the test seam
    /// for the HTTP path.
    pub fn with_transport(cfg: BackendConfig, transport: Box<dyn Transport>) -> Result<LlmClient> {
        cfg.validate()?;
        let adapter = match &cfg.adapter {
            Some(path) => AdapterDescriptor::from_path(path)?,
            None => AdapterDescriptor::default(),
        };
        let url = cfg
            .endpoint_url
            .clone()
            .ok_or_else(|| LlmError::Config("HTTP backend needs endpoint_url".into()))?;
        Ok(LlmClient {
            cfg,
            backend: Backend::Http {
                transport,
                adapter,
                url,
            },
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    /// Resolve one job: cache hit, or request with retries, then store.
    pub fn complete(&self, job: &PromptJob, cache: &ResponseCache) -> Result<ModelReply> {
        let key = cache_key(
            &job.prompt,
            &self.cfg.model_name,
            self.cfg.temperature,
            self.cfg.max_output_tokens,
        );
        if let Some(entry) = cache.get(&key) {
            return Ok(ModelReply {
                job_id: job.job_id.clone(),
                raw_text: entry.raw_text,
                backend: self.cfg.fingerprint(),
                latency_ms: 0,
                cached: true,
            });
        }

        let started = Instant::now();
        let raw_text = self.request_with_retries(&job.prompt)?;
        let latency_ms = started.elapsed().as_millis() as u64;

        cache.put(CacheEntry {
            key,
            model_name: self.cfg.model_name.clone(),
            temperature: self.cfg.temperature,
            raw_text: raw_text.clone(),
        })?;

        Ok(ModelReply {
            job_id: job.job_id.clone(),
            raw_text,
            backend: self.cfg.fingerprint(),
            latency_ms,
            cached: false,
        })
    }

    fn request_with_retries(&self, prompt: &str) -> Result<String> {
        let attempts = self.cfg.max_retries + 1;
        let mut last: Option<LlmError> = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                self.backoff(attempt - 1);
            }
            match self.request_once(prompt) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(LlmError::RetriesExhausted {
            attempts,
            last: last.map(|e| e.to_string()).unwrap_or_default(),
        })
    }

    /// Exponential backoff with full jitter: base * 2^attempt, scaled by a
    /// random factor in [0.5, 1.5).
    fn backoff(&self, attempt: u32) {
        if self.cfg.retry_base_ms == 0 {
            return;
        }
        let base = self
            .cfg
            .retry_base_ms
            .saturating_mul(1u64 << attempt.min(16));
        let factor = rand::thread_rng().gen_range(0.5..1.5);
        std::thread::sleep(Duration::from_millis((base as f64 * factor) as u64));
    }

    fn request_once(&self, prompt: &str) -> Result<String> {
        match &self.backend {
            Backend::Mock(rules) => rules
                .reply_for(prompt)
                .map(str::to_string)
                .ok_or_else(|| LlmError::BadResponse("no mock rule matched the prompt".into())),
            Backend::Http {
                transport,
                adapter,
                url,
            } => {
                let secret = match &self.cfg.auth_env {
                    Some(name) => Some(
                        std::env::var(name).map_err(|_| LlmError::MissingSecret(name.clone()))?,
                    ),
                    None => None,
                };
                let body = adapter.instantiate(prompt, &self.cfg);
                let headers = adapter.headers(secret.as_deref());
                let resp = transport.post_json(
                    url,
                    &headers,
                    &body,
                    Duration::from_secs(self.cfg.timeout_secs),
                )?;
                match resp.status {
                    200..=299 => adapter.extract_text(&resp.body),
                    429 | 529 => Err(LlmError::RateLimited {
                        status: resp.status,
                    }),
                    s if retryable_status(s) => {
                        Err(LlmError::Transport(format!("status {s}: {}", resp.body)))
                    }
                    s => Err(LlmError::BackendRejected {
                        status: s,
                        detail: resp.body,
                    }),
                }
            }
        }
    }

    /// Resolve a batch with at most `max_in_flight` requests outstanding.
    /// Results come back in job order; failures are recorded per job.
    pub fn run_batch(
        &self,
        jobs: &[PromptJob],
        cache: &ResponseCache,
    ) -> Vec<std::result::Result<ModelReply, JobFailure>> {
        let n = jobs.len();
        let results: Mutex<Vec<Option<std::result::Result<ModelReply, JobFailure>>>> =
            Mutex::new((0..n).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.cfg.max_in_flight.min(n.max(1));

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let outcome = self.complete(&jobs[i], cache).map_err(|e| JobFailure {
                        job_id: jobs[i].job_id.clone(),
                        error: e.to_string(),
                    });
                    results.lock().unwrap()[i] = Some(outcome);
                });
            }
        });

        results
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|slot| slot.expect("every job resolved"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::promptgen::TemplateKind;
    use std::sync::atomic::AtomicU32;

    fn job(id: &str, prompt: &str) -> PromptJob {
        PromptJob {
            job_id: id.into(),
            record_id: id.into(),
            template_kind: TemplateKind::SequenceOnly,
            prompt: prompt.into(),
            truncated: false,
        }
    }

    fn mock_cfg() -> BackendConfig {
        BackendConfig {
            kind: BackendKind::Mock,
            mock_rules: Some(
                std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mock_rules.json"),
            ),
            retry_base_ms: 0,
            ..BackendConfig::default()
        }
    }

    fn http_cfg() -> BackendConfig {
        BackendConfig {
            kind: BackendKind::HttpChat,
            endpoint_url: Some("http://test.invalid/v1/chat".into()),
            model_name: "fake-model".into(),
            retry_base_ms: 0,
            max_retries: 3,
            ..BackendConfig::default()
        }
    }

    fn tmpcache() -> (tempfile::TempDir, ResponseCache) {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(&dir.path().join("cache.jsonl")).unwrap();
        (dir, cache)
    }

    /// Scripted transport: pops responses front-to-back, counts calls, and
    /// tracks the maximum number of concurrently outstanding requests.
    struct FakeTransport {
        script: Mutex<Vec<std::result::Result<TransportResponse, &'static str>>>,
        calls: AtomicU32,
        in_flight: AtomicUsize,
        max_in_flight: AtomicUsize,
        delay: Duration,
    }

    impl FakeTransport {
        fn replying(script: Vec<std::result::Result<TransportResponse, &'static str>>) -> Self {
            FakeTransport {
                script: Mutex::new(script),
                calls: AtomicU32::new(0),
                in_flight: AtomicUsize::new(0),
                max_in_flight: AtomicUsize::new(0),
                delay: Duration::ZERO,
            }
        }

        fn ok(text: &str) -> TransportResponse {
            TransportResponse {
                status: 200,
                body: format!(
                    r#"{{"choices":[{{"message":{{"role":"assistant","content":{}}}}}]}}"#,
                    serde_json::to_string(text).unwrap()
                ),
            }
        }
    }

    impl Transport for FakeTransport {
        fn post_json(
            &self,
            _url: &str,
            _headers: &[(String, String)],
            _body: &serde_json::Value,
            _timeout: Duration,
        ) -> std::result::Result<TransportResponse, LlmError> {
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.max_in_flight.fetch_max(now, Ordering::SeqCst);
            self.calls.fetch_add(1, Ordering::SeqCst);
            if !self.delay.is_zero() {
                std::thread::sleep(self.delay);
            }
            let item = self.script.lock().unwrap().pop();
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            match item {
                Some(Ok(resp)) => Ok(resp),
                Some(Err(msg)) => Err(LlmError::Transport(msg.into())),
                None => Ok(Self::ok("default reply")),
            }
        }
    }

    #[test]
    fn second_completion_is_served_from_cache() {
        let (_dir, cache) = tmpcache();
        let client = LlmClient::new(mock_cfg()).unwrap();
        let j = job("j1", "prompt mentioning vanXY somewhere");
        let first = client.complete(&j, &cache).unwrap();
        let second = client.complete(&j, &cache).unwrap();
        assert!(!first.cached);
        assert!(second.cached);
        assert_eq!(first.raw_text, second.raw_text);
        assert!(first.raw_text.contains("Glycopeptides"));
    }

    #[test]
    fn mock_rule_table_drives_replies() {
        let (_dir, cache) = tmpcache();
        let client = LlmClient::new(mock_cfg()).unwrap();
        let reply = client
            .complete(
                &job("j", "... 'sequence_title': '...vanXY-C gene...' ..."),
                &cache,
            )
            .unwrap();
        assert!(reply.raw_text.contains("Glycopeptides"));
    }

    #[test]
    fn overloaded_endpoint_exhausts_retries() {
        let overloaded = || {
            Ok(TransportResponse {
                status: 529,
                body: "overloaded".into(),
            })
        };
        let transport =
            FakeTransport::replying(vec![overloaded(), overloaded(), overloaded(), overloaded()]);
        let (_dir, cache) = tmpcache();
        let client = LlmClient::with_transport(http_cfg(), Box::new(transport)).unwrap();
        let err = client.complete(&job("j", "p"), &cache).unwrap_err();
        match err {
            LlmError::RetriesExhausted { attempts, .. } => assert_eq!(attempts, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn retry_then_success() {
        // script pops from the back: first a 503, then a good reply
        let transport = FakeTransport::replying(vec![
            Ok(FakeTransport::ok("Tetracyclines, clearly.")),
            Ok(TransportResponse {
                status: 503,
                body: "unavailable".into(),
            }),
        ]);
        let (_dir, cache) = tmpcache();
        let client = LlmClient::with_transport(http_cfg(), Box::new(transport)).unwrap();
        let reply = client.complete(&job("j", "p"), &cache).unwrap();
        assert_eq!(reply.raw_text, "Tetracyclines, clearly.");
    }

    #[test]
    fn non_retryable_status_fails_fast() {
        let transport = FakeTransport::replying(vec![Ok(TransportResponse {
            status: 401,
            body: "bad key".into(),
        })]);
        let (_dir, cache) = tmpcache();
        let client = LlmClient::with_transport(http_cfg(), Box::new(transport)).unwrap();
        let err = client.complete(&job("j", "p"), &cache).unwrap_err();
        assert!(matches!(err, LlmError::BackendRejected { status: 401, .. }));
    }

    #[test]
    fn batch_bound_and_order_observed() {
        let jobs: Vec<PromptJob> = (0..100)
            .map(|i| job(&format!("j{i}"), &format!("p{i}")))
            .collect();
        let cfg = BackendConfig {
            max_in_flight: 4,
            ..http_cfg()
        };
        let transport = Box::leak(Box::new(FakeTransport {
            script: Mutex::new(Vec::new()),
            calls: AtomicU32::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            delay: Duration::from_millis(2),
        }));
        struct Shared(&'static FakeTransport);
        impl Transport for Shared {
            fn post_json(
                &self,
                url: &str,
                headers: &[(String, String)],
                body: &serde_json::Value,
                timeout: Duration,
            ) -> std::result::Result<TransportResponse, LlmError> {
                self.0.post_json(url, headers, body, timeout)
            }
        }
        let (_dir, cache) = tmpcache();
        let client = LlmClient::with_transport(cfg, Box::new(Shared(transport))).unwrap();
        let results = client.run_batch(&jobs, &cache);
        for (i, result) in results.iter().enumerate() {
            assert_eq!(result.as_ref().unwrap().job_id, format!("j{i}"));
        }
        assert!(transport.max_in_flight.load(Ordering::SeqCst) <= 4);
        assert_eq!(transport.calls.load(Ordering::SeqCst), 100);

        // warm cache: a rerun issues zero network calls
        let results = client.run_batch(&jobs, &cache);
        assert!(results.iter().all(|r| r.as_ref().unwrap().cached));
        assert_eq!(transport.calls.load(Ordering::SeqCst), 100);
    }

    #[test]
    fn one_failure_does_not_poison_the_batch() {
        // ten unique prompts; the seventh (by pop order from the back) gets a
        // non-retryable 400
        let mut script: Vec<std::result::Result<TransportResponse, &'static str>> = Vec::new();
        for i in 0..10 {
            if i == 3 {
                script.push(Ok(TransportResponse {
                    status: 400,
                    body: "bad request".into(),
                }));
            } else {
                script.push(Ok(FakeTransport::ok(&format!("reply {i}"))));
            }
        }
        let cfg = BackendConfig {
            max_in_flight: 1, // deterministic job→response pairing
            ..http_cfg()
        };
        let jobs: Vec<PromptJob> = (0..10)
            .map(|i| job(&format!("j{i}"), &format!("p{i}")))
            .collect();
        let (_dir, cache) = tmpcache();
        let client =
            LlmClient::with_transport(cfg, Box::new(FakeTransport::replying(script))).unwrap();
        let results = client.run_batch(&jobs, &cache);
        let failures: Vec<&JobFailure> = results.iter().filter_map(|r| r.as_ref().err()).collect();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].job_id, "j6");
        assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 9);
    }

    #[test]
    fn missing_secret_is_reported() {
        let cfg = BackendConfig {
            auth_env: Some("AMRCLASS_TEST_SECRET_THAT_DOES_NOT_EXIST".into()),
            ..http_cfg()
        };
        let (_dir, cache) = tmpcache();
        let client =
            LlmClient::with_transport(cfg, Box::new(FakeTransport::replying(vec![]))).unwrap();
        let err = client.complete(&job("j", "p"), &cache).unwrap_err();
        assert!(matches!(err, LlmError::MissingSecret(_)));
    }

    #[test]
    fn secret_value_never_reaches_the_cache_file() {
        let secret = "sk-super-secret-value-12345";
        std::env::set_var("AMRCLASS_TEST_SECRET", secret);
        let cfg = BackendConfig {
            auth_env: Some("AMRCLASS_TEST_SECRET".into()),
            ..http_cfg()
        };
        let dir = tempfile::tempdir().unwrap();
        let cache_path = dir.path().join("cache.jsonl");
        let cache = ResponseCache::open(&cache_path).unwrap();
        let client =
            LlmClient::with_transport(cfg, Box::new(FakeTransport::replying(vec![]))).unwrap();
        client.complete(&job("j", "prompt"), &cache).unwrap();
        let contents = std::fs::read_to_string(&cache_path).unwrap();
        assert!(!contents.contains(secret));
        // the config itself serializes only the env var NAME
        let cfg_json = serde_json::to_string(client.config()).unwrap();
        assert!(!cfg_json.contains(secret));
    }

    #[test]
    fn cache_key_is_sensitive_to_all_inputs() {
        let base = cache_key("p", "m", 0.0, 100);
        assert_ne!(base, cache_key("q", "m", 0.0, 100));
        assert_ne!(base, cache_key("p", "n", 0.0, 100));
        assert_ne!(base, cache_key("p", "m", 0.5, 100));
        assert_ne!(base, cache_key("p", "m", 0.0, 101));
        assert_eq!(base, cache_key("p", "m", 0.0, 100));
    }

    #[test]
    fn config_validation() {
        assert!(BackendConfig::default().validate().is_ok());
        assert!(BackendConfig {
            temperature: -0.1,
            ..BackendConfig::default()
        }
        .validate()
        .is_err());
        assert!(BackendConfig {
            max_in_flight: 0,
            ..BackendConfig::default()
        }
        .validate()
        .is_err());
        assert!(BackendConfig {
            kind: BackendKind::HttpChat,
            endpoint_url: None,
            ..BackendConfig::default()
        }
        .validate()
        .is_err());
    }
}
