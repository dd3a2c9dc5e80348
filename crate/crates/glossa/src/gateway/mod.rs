//! Chat-completion gateway: temperature policy, retries, an in-flight cap,
//! a request budget, a content-addressed response cache and an audit log.

mod mock;
mod openai;

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use glossa_core::index::sha256_hex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

pub use mock::{echo_distribution, Fault, MockBackend, DEFAULT_MOCK_RESPONSE};
pub use openai::OpenAiBackend;

pub const GLOSSING_TEMPERATURE: f64 = 0.0;
pub const INSTRUCTION_TEMPERATURE: f64 = 0.25;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Purpose {
    Glossing,
    InstructionGeneration,
}

impl Purpose {
    pub fn default_temperature(self) -> f64 {
        match self {
            Purpose::Glossing => GLOSSING_TEMPERATURE,
            Purpose::InstructionGeneration => INSTRUCTION_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChatRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub purpose: Purpose,
    pub request_id: String,
}

impl ChatRequest {
    pub fn new(purpose: Purpose, prompt: impl Into<String>) -> Self {
        ChatRequest {
            prompt: prompt.into(),
            temperature: purpose.default_temperature(),
            max_tokens: DEFAULT_MAX_TOKENS,
            purpose,
            request_id: uuid::Uuid::new_v4().to_string(),
        }
    }

    pub fn glossing(prompt: impl Into<String>) -> Self {
        Self::new(Purpose::Glossing, prompt)
    }

    pub fn instruction_generation(prompt: impl Into<String>) -> Self {
        Self::new(Purpose::InstructionGeneration, prompt)
    }

    pub fn prompt_hash(&self) -> String {
        sha256_hex(&self.prompt)
    }

    pub fn validate(&self, allow_temperature_override: bool) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::ConfigViolation(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::ConfigViolation(
                "maxTokens must be positive".into(),
            ));
        }
        let expected = self.purpose.default_temperature();
        if !allow_temperature_override && self.temperature != expected {
            return Err(GatewayError::ConfigViolation(format!(
                "{:?} requests run at temperature {expected}, got {}",
                self.purpose, self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "snake_case")]
pub struct GatewayConfig {
    pub endpoint_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// Maximum number of backend requests per gateway lifetime.
    pub cost_cap: Option<u64>,
    pub allow_temperature_override: bool,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
    pub cache_dir: Option<PathBuf>,
    pub audit_log: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
            max_retries: 3,
            max_in_flight: 4,
            cost_cap: None,
            allow_temperature_override: false,
            backoff_base_ms: 500,
            backoff_max_ms: 30_000,
            cache_dir: None,
            audit_log: None,
        }
    }
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        let config: GatewayConfig =
            toml::from_str(text).map_err(|e| GatewayError::ConfigViolation(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = fs::read_to_string(path)
            .map_err(|e| GatewayError::ConfigViolation(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn check(&self) -> Result<(), GatewayError> {
        if self.max_in_flight == 0 {
            return Err(GatewayError::ConfigViolation(
                "max_in_flight must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Delay before retry number `attempt` (1-based): exponential with up to
    /// 50% added jitter, capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let exp = self
            .backoff_base_ms
            .saturating_mul(1u64 << attempt.saturating_sub(1).min(20));
        let capped = exp.min(self.backoff_max_ms);
        let jitter = if capped > 0 {
            rand::rng().random_range(0..=capped / 2)
        } else {
            0
        };
        Duration::from_millis(capped + jitter)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: rate limits, 5xx, timeouts, connection resets.
    Transient {
        status: Option<u16>,
        message: String,
    },
    Fatal {
        status: Option<u16>,
        message: String,
    },
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendError::Transient { status, message }
            | BackendError::Fatal { status, message } => match status {
                Some(s) => write!(f, "HTTP {s}: {message}"),
                None => f.write_str(message),
            },
        }
    }
}

impl BackendError {
    pub fn from_status(status: u16, message: String) -> Self {
        if status == 429 || status == 408 || status >= 500 {
            BackendError::Transient {
                status: Some(status),
                message,
            }
        } else {
            BackendError::Fatal {
                status: Some(status),
                message,
            }
        }
    }
}

#[async_trait]
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    async fn send(&self, request: &ChatRequest, model: &str) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("config violation: {0}")]
    ConfigViolation(String),
    #[error("request budget of {cap} exhausted")]
    Budget { cap: u64 },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("request rejected: {0}")]
    Rejected(String),
}

impl GatewayError {
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::ConfigViolation(_) => "config-violation",
            GatewayError::Budget { .. } => "budget",
            GatewayError::Transport { .. } => "transport",
            GatewayError::Rejected(_) => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub prompt_hash: String,
    pub cached: bool,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GatewayStats {
    pub requests: u64,
    pub backend_requests: u64,
    pub attempts: u64,
    pub cache_hits: u64,
    pub peak_in_flight: usize,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct AuditRecord<'a> {
    request_id: &'a str,
    attempt: u32,
    prompt_hash: &'a str,
    model: &'a str,
    temperature: f64,
    max_tokens: u32,
    purpose: Purpose,
    backend: &'a str,
    outcome: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    latency_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    response_hash: Option<String>,
    timestamp: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CacheEntry {
    prompt_hash: String,
    model: String,
    temperature: f64,
    prompt: String,
    response: String,
}

pub struct Gateway {
    config: GatewayConfig,
    backend: Arc<dyn Backend>,
    permits: Semaphore,
    cache: Mutex<HashMap<String, String>>,
    audit: Option<Mutex<File>>,
    requests: AtomicU64,
    backend_requests: AtomicU64,
    attempts: AtomicU64,
    cache_hits: AtomicU64,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.name())
            .field("model", &self.config.model)
            .finish()
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl Gateway {
    pub fn new(config: GatewayConfig, backend: Arc<dyn Backend>) -> Result<Self, GatewayError> {
        config.check()?;
        let audit = match &config.audit_log {
            Some(path) => {
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(io_violation)?;
                }
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(io_violation)?;
                Some(Mutex::new(file))
            }
            None => None,
        };
        if let Some(dir) = &config.cache_dir {
            fs::create_dir_all(dir).map_err(io_violation)?;
        }
        Ok(Gateway {
            permits: Semaphore::new(config.max_in_flight),
            config,
            backend,
            cache: Mutex::new(HashMap::new()),
            audit,
            requests: AtomicU64::new(0),
            backend_requests: AtomicU64::new(0),
            attempts: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn model(&self) -> &str {
        &self.config.model
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            requests: self.requests.load(Ordering::SeqCst),
            backend_requests: self.backend_requests.load(Ordering::SeqCst),
            attempts: self.attempts.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
            peak_in_flight: self.peak_in_flight.load(Ordering::SeqCst),
        }
    }

    fn cache_key(&self, prompt_hash: &str, temperature: f64) -> String {
        sha256_hex(&format!(
            "{prompt_hash}\u{1f}{}\u{1f}{temperature}",
            self.config.model
        ))
    }

    fn cache_get(&self, key: &str) -> Option<String> {
        if let Some(hit) = self.cache.lock().unwrap().get(key) {
            return Some(hit.clone());
        }
        let path = self.config.cache_dir.as_ref()?.join(format!("{key}.json"));
        let entry: CacheEntry = serde_json::from_str(&fs::read_to_string(path).ok()?).ok()?;
        self.cache
            .lock()
            .unwrap()
            .insert(key.to_string(), entry.response.clone());
        Some(entry.response)
    }

    fn cache_put(&self, key: &str, request: &ChatRequest, prompt_hash: &str, response: &str) {
        self.cache
            .lock()
            .unwrap()
            .insert(key.to_string(), response.to_string());
        if let Some(dir) = &self.config.cache_dir {
            let entry = CacheEntry {
                prompt_hash: prompt_hash.to_string(),
                model: self.config.model.clone(),
                temperature: request.temperature,
                prompt: request.prompt.clone(),
                response: response.to_string(),
            };
            let tmp = dir.join(format!("{key}.json.tmp"));
            let written = serde_json::to_vec_pretty(&entry)
                .map_err(std::io::Error::other)
                .and_then(|bytes| fs::write(&tmp, bytes))
                .and_then(|_| fs::rename(&tmp, dir.join(format!("{key}.json"))));
            if let Err(e) = written {
                tracing::warn!("cache write failed: {e}");
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn audit(
        &self,
        request: &ChatRequest,
        prompt_hash: &str,
        attempt: u32,
        outcome: &str,
        error: Option<String>,
        latency: Duration,
        response: Option<&str>,
    ) {
        let Some(file) = &self.audit else {
            return;
        };
        let record = AuditRecord {
            request_id: &request.request_id,
            attempt,
            prompt_hash,
            model: &self.config.model,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            purpose: request.purpose,
            backend: self.backend.name(),
            outcome,
            error,
            latency_ms: latency.as_millis() as u64,
            response_hash: response.map(sha256_hex),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let mut line = serde_json::to_string(&record).expect("audit record serializes");
        line.push('\n');
        let mut f = file.lock().unwrap();
        if let Err(e) = f.write_all(line.as_bytes()).and_then(|_| f.flush()) {
            tracing::warn!("audit write failed: {e}");
        }
    }

    pub async fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        request.validate(self.config.allow_temperature_override)?;
        self.requests.fetch_add(1, Ordering::SeqCst);
        let prompt_hash = request.prompt_hash();
        let key = self.cache_key(&prompt_hash, request.temperature);
        if let Some(text) = self.cache_get(&key) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            self.audit(
                request,
                &prompt_hash,
                0,
                "cache-hit",
                None,
                Duration::ZERO,
                Some(&text),
            );
            return Ok(Completion {
                text,
                prompt_hash,
                cached: true,
                attempts: 0,
            });
        }
        if let Some(cap) = self.config.cost_cap {
            let spent = self.backend_requests.fetch_add(1, Ordering::SeqCst);
            if spent >= cap {
                self.backend_requests.fetch_sub(1, Ordering::SeqCst);
                self.audit(
                    request,
                    &prompt_hash,
                    0,
                    "budget",
                    None,
                    Duration::ZERO,
                    None,
                );
                return Err(GatewayError::Budget { cap });
            }
        } else {
            self.backend_requests.fetch_add(1, Ordering::SeqCst);
        }

        let _permit = self
            .permits
            .acquire()
            .await
            .expect("semaphore never closed");
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = InFlight(&self.in_flight);
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);

        let mut attempt = 0;
        loop {
            attempt += 1;
            self.attempts.fetch_add(1, Ordering::SeqCst);
            let started = Instant::now();
            let timeout = Duration::from_secs(self.config.timeout_secs.max(1));
            let result =
                match tokio::time::timeout(timeout, self.backend.send(request, &self.config.model))
                    .await
                {
                    Ok(r) => r,
                    Err(_) => Err(BackendError::Transient {
                        status: None,
                        message: format!("timed out after {}s", timeout.as_secs()),
                    }),
                };
            let latency = started.elapsed();
            match result {
                Ok(text) => {
                    self.audit(
                        request,
                        &prompt_hash,
                        attempt,
                        "ok",
                        None,
                        latency,
                        Some(&text),
                    );
                    self.cache_put(&key, request, &prompt_hash, &text);
                    return Ok(Completion {
                        text,
                        prompt_hash,
                        cached: false,
                        attempts: attempt,
                    });
                }
                Err(e @ BackendError::Fatal { .. }) => {
                    self.audit(
                        request,
                        &prompt_hash,
                        attempt,
                        "fatal",
                        Some(e.to_string()),
                        latency,
                        None,
                    );
                    return Err(GatewayError::Rejected(e.to_string()));
                }
                Err(e @ BackendError::Transient { .. }) => {
                    self.audit(
                        request,
                        &prompt_hash,
                        attempt,
                        "transient",
                        Some(e.to_string()),
                        latency,
                        None,
                    );
                    if attempt > self.config.max_retries {
                        return Err(GatewayError::Transport {
                            attempts: attempt,
                            message: e.to_string(),
                        });
                    }
                    tokio::time::sleep(self.config.backoff(attempt)).await;
                }
            }
        }
    }
}

fn io_violation(e: std::io::Error) -> GatewayError {
    GatewayError::ConfigViolation(e.to_string())
}
