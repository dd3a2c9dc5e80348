use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use glossa_core::index::sha256_hex;

use super::{Backend, BackendError, ChatRequest};

/// Unscripted prompts get this: one `?` gloss.
pub const DEFAULT_MOCK_RESPONSE: &str = r#"{"glosses": ["?"]}"#;

/// A scripted failure consumed by the next attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    Status(u16),
    Disconnect,
}

/// Answers with the distribution head shown in a glossing prompt, or `?`
/// when the prompt shows none. Gives the mock a deterministic, non-trivial
/// behaviour for end-to-end runs.
pub fn echo_distribution(prompt: &str) -> Option<String> {
    let word = prompt
        .split_once("predict glosses for the word:\n\n")?
        .1
        .lines()
        .next()?;
    let glosses: Vec<&str> = prompt
        .split_once("often appears with the following tags")
        .and_then(|(_, rest)| rest.split("\n\n").nth(1))
        .map(|line| {
            line.split(", ")
                .filter_map(|item| item.rsplit_once(" (").map(|(g, _)| g))
                .take(3)
                .collect()
        })
        .unwrap_or_default();
    let glosses = if glosses.is_empty() {
        vec!["?"]
    } else {
        glosses
    };
    Some(serde_json::json!({ "word": word, "glosses": glosses }).to_string())
}

type Responder = Box<dyn Fn(&str) -> Option<String> + Send + Sync>;

/// Deterministic backend: answers are looked up by the SHA-256 of the
/// prompt, then offered to an optional responder, then defaulted.
pub struct MockBackend {
    scripted: HashMap<String, String>,
    responder: Option<Responder>,
    default_response: String,
    faults: Mutex<VecDeque<Fault>>,
    delay: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend {
            scripted: HashMap::new(),
            responder: None,
            default_response: DEFAULT_MOCK_RESPONSE.to_string(),
            faults: Mutex::new(VecDeque::new()),
            delay: Duration::ZERO,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        }
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scripts `response` for the exact prompt text.
    pub fn script(mut self, prompt: &str, response: impl Into<String>) -> Self {
        self.scripted.insert(sha256_hex(prompt), response.into());
        self
    }

    /// Scripts `response` for a prompt hash.
    pub fn script_hash(mut self, hash: impl Into<String>, response: impl Into<String>) -> Self {
        self.scripted.insert(hash.into(), response.into());
        self
    }

    /// Loads a JSON object mapping prompt hashes to responses.
    pub fn with_script_json(mut self, text: &str) -> Result<Self, serde_json::Error> {
        let map: HashMap<String, String> = serde_json::from_str(text)?;
        self.scripted.extend(map);
        Ok(self)
    }

    pub fn responder(mut self, f: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> Self {
        self.responder = Some(Box::new(f));
        self
    }

    pub fn default_response(mut self, text: impl Into<String>) -> Self {
        self.default_response = text.into();
        self
    }

    pub fn faults(self, faults: impl IntoIterator<Item = Fault>) -> Self {
        self.faults.lock().unwrap().extend(faults);
        self
    }

    pub fn delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of overlapping `send` calls observed.
    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    async fn send(&self, request: &ChatRequest, _model: &str) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            tokio::time::sleep(self.delay).await;
        }
        self.in_flight.fetch_sub(1, Ordering::SeqCst);

        let fault = self.faults.lock().unwrap().pop_front();
        match fault {
            Some(Fault::Status(code)) => {
                return Err(BackendError::from_status(code, "scripted fault".into()))
            }
            Some(Fault::Disconnect) => {
                return Err(BackendError::Transient {
                    status: None,
                    message: "scripted disconnect".into(),
                })
            }
            None => {}
        }
        if let Some(r) = self.scripted.get(&request.prompt_hash()) {
            return Ok(r.clone());
        }
        if let Some(answer) = self.responder.as_ref().and_then(|f| f(&request.prompt)) {
            return Ok(answer);
        }
        Ok(self.default_response.clone())
    }
}
