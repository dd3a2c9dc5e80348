//! HTTP/JSON annotation service.
//!
//! Reads run against an `Arc` snapshot taken once per request, so a request
//! never mixes two index states. Feedback goes through a single writer that
//! logs the record, builds the next snapshot and only then swaps it in.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::future::join_all;
use glossa_core::eval::ConfusionMatrix;
use glossa_core::feedback::{
    dynamic_corpus, entry_key, FeedbackCorpus, FeedbackError, FeedbackRecord, FeedbackTarget,
};
use glossa_core::igt::{tokenize, Split};
use glossa_core::index::{build_index_with, IndexOptions};
use glossa_core::instructions::{InstructionStore, TagPair, DEFAULT_MAX_INSTANCES};
use glossa_core::prompt::{build_gloss_prompt, word_evidence, PromptConfig};
use glossa_core::{CorpusIndex, IgtEntry};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;

use crate::feedback_log::{FeedbackLog, LogError};
use crate::gateway::Gateway;
use crate::pipeline::{gloss_word, retrieval_kbest, PipelineError, WordOutcome};
use crate::store::{generate_instructions, InstructionDir, InstructionSet, StoreError};

pub const SCHEMA_VERSION: u32 = 1;

/// Sentences glossed but not yet annotated that feedback may refer to by key.
const PENDING_CAPACITY: usize = 4096;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub language: String,
    pub seed: u64,
    pub prompt: PromptConfig,
    pub max_instances: usize,
}

impl ServiceConfig {
    pub fn new(language: impl Into<String>) -> Self {
        ServiceConfig {
            language: language.into(),
            seed: 0,
            prompt: PromptConfig::default(),
            max_instances: DEFAULT_MAX_INSTANCES,
        }
    }
}

#[derive(Debug)]
pub struct Snapshot {
    pub index: CorpusIndex,
    pub feedback_records: usize,
}

impl Snapshot {
    pub fn id(&self) -> &str {
        &self.index.corpus_id
    }
}

struct Writer {
    corpus: FeedbackCorpus,
    log: Option<FeedbackLog>,
}

#[derive(Default)]
struct Pending {
    sentences: HashMap<String, (Vec<String>, String)>,
    order: VecDeque<String>,
}

impl Pending {
    fn remember(&mut self, key: String, tokens: Vec<String>, translation: String) {
        if self
            .sentences
            .insert(key.clone(), (tokens, translation))
            .is_none()
        {
            self.order.push_back(key);
        }
        while self.order.len() > PENDING_CAPACITY {
            if let Some(old) = self.order.pop_front() {
                self.sentences.remove(&old);
            }
        }
    }
}

struct Instructions {
    sets: Vec<InstructionSet>,
    store: InstructionStore,
    dir: Option<InstructionDir>,
}

pub struct AppState {
    config: ServiceConfig,
    base: Vec<IgtEntry>,
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<Writer>,
    pending: std::sync::Mutex<Pending>,
    gateway: Option<Arc<Gateway>>,
    instructions: RwLock<Instructions>,
    confusions: Option<ConfusionMatrix>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("replaying feedback: {0}")]
    Replay(#[from] FeedbackError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub struct AppBuilder {
    config: ServiceConfig,
    base: Vec<IgtEntry>,
    log: Option<FeedbackLog>,
    gateway: Option<Arc<Gateway>>,
    instruction_dir: Option<InstructionDir>,
    confusions: Option<ConfusionMatrix>,
}

impl AppBuilder {
    pub fn new(config: ServiceConfig, base: Vec<IgtEntry>) -> Self {
        AppBuilder {
            config,
            base,
            log: None,
            gateway: None,
            instruction_dir: None,
            confusions: None,
        }
    }

    pub fn feedback_log(mut self, log: FeedbackLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn gateway(mut self, gateway: Arc<Gateway>) -> Self {
        self.gateway = Some(gateway);
        self
    }

    pub fn instruction_dir(mut self, dir: InstructionDir) -> Self {
        self.instruction_dir = Some(dir);
        self
    }

    pub fn confusions(mut self, matrix: ConfusionMatrix) -> Self {
        self.confusions = Some(matrix);
        self
    }

    /// Replays any existing feedback log and builds the first snapshot.
    pub fn build(self) -> Result<Arc<AppState>, StartupError> {
        let records = match &self.log {
            Some(log) => log.read_records()?,
            None => Vec::new(),
        };
        let corpus = FeedbackCorpus::replay(&self.config.language, &records)?;
        let index = build_snapshot_index(&self.base, &corpus, self.config.seed);
        let (sets, store) = match &self.instruction_dir {
            Some(dir) => {
                let sets = dir.load()?;
                let store = dir.load_store()?;
                (sets, store)
            }
            None => (Vec::new(), InstructionStore::new()),
        };
        Ok(Arc::new(AppState {
            snapshot: RwLock::new(Arc::new(Snapshot {
                index,
                feedback_records: corpus.applied(),
            })),
            writer: Mutex::new(Writer {
                corpus,
                log: self.log,
            }),
            pending: std::sync::Mutex::new(Pending::default()),
            instructions: RwLock::new(Instructions {
                sets,
                store,
                dir: self.instruction_dir,
            }),
            config: self.config,
            base: self.base,
            gateway: self.gateway,
            confusions: self.confusions,
        }))
    }
}

pub fn build_snapshot_index(
    base: &[IgtEntry],
    feedback: &FeedbackCorpus,
    seed: u64,
) -> CorpusIndex {
    build_index_with(&dynamic_corpus(base, feedback), &IndexOptions { seed })
}

impl AppState {
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap().clone()
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Validates, logs, rebuilds and swaps. On any failure the active
    /// snapshot and the in-memory corpus are left as they were.
    pub async fn record_feedback(
        &self,
        mut record: FeedbackRecord,
    ) -> Result<(String, Arc<Snapshot>, String), ApiError> {
        if record.timestamp.is_empty() {
            record.timestamp = chrono::Utc::now().to_rfc3339();
        }
        let mut writer = self.writer.lock().await;
        // a sentence known only from a gloss request is logged in full, so
        // the log stays replayable on its own
        if let FeedbackTarget::Existing { entry_ref } = &record.target {
            if writer.corpus.get(entry_ref).is_none() {
                if let Some((tokens, translation)) = self
                    .pending
                    .lock()
                    .unwrap()
                    .sentences
                    .get(entry_ref)
                    .cloned()
                {
                    record.target = FeedbackTarget::New {
                        transcription: tokens,
                        translation,
                    };
                }
            }
        }
        let mut next = writer.corpus.clone();
        let key = next.apply(&record).map_err(ApiError::feedback)?;
        let entry = next.get(&key).expect("applied entry exists").clone();
        if let Some(log) = &writer.log {
            log.append(&record, &entry).map_err(|e| {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
            })?;
        }
        let base = self.base.clone();
        let seed = self.config.seed;
        let corpus = next.clone();
        let index = tokio::task::spawn_blocking(move || build_snapshot_index(&base, &corpus, seed))
            .await
            .map_err(|e| {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
            })?;
        let snapshot = Arc::new(Snapshot {
            index,
            feedback_records: next.applied(),
        });
        *self.snapshot.write().unwrap() = snapshot.clone();
        writer.corpus = next;
        let word = entry.transcription[record.position].clone();
        Ok((key, snapshot, word))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: String,
    message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid-request", message)
    }

    fn feedback(e: FeedbackError) -> Self {
        let kind = match e {
            FeedbackError::InvalidGloss(_) | FeedbackError::Unresolved => "invalid-gloss",
            FeedbackError::UnknownEntry(_) => "unknown-entry",
            _ => "invalid-request",
        };
        Self::new(StatusCode::BAD_REQUEST, kind, e.to_string())
    }

    fn pipeline(e: PipelineError) -> Self {
        match e {
            PipelineError::Gateway(g) => {
                Self::new(StatusCode::BAD_GATEWAY, g.kind(), g.to_string())
            }
            PipelineError::Contract(c) => Self::bad_request(c.to_string()),
            other => Self::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "internal",
                other.to_string(),
            ),
        }
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schemaVersion": SCHEMA_VERSION,
            "error": { "kind": self.kind, "message": self.message },
        });
        (self.status, Json(body)).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct GlossRequest {
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    sentence: Option<String>,
    #[serde(default)]
    translation: String,
    #[serde(default = "yes")]
    use_instructions: bool,
}

fn yes() -> bool {
    true
}

async fn handle_gloss(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: GlossRequest = parse_body(&body)?;
    let tokens = match (req.tokens, req.sentence) {
        (Some(t), _) => t,
        (None, Some(s)) => tokenize(&s),
        (None, None) => Vec::new(),
    };
    if tokens.is_empty() {
        return Err(ApiError::bad_request("no tokens to gloss"));
    }
    if tokens
        .iter()
        .any(|t| t.is_empty() || t.chars().any(char::is_whitespace))
    {
        return Err(ApiError::bad_request(
            "tokens must be nonempty and whitespace-free",
        ));
    }
    let snap = state.snapshot();
    let index = &snap.index;
    let entry = IgtEntry::new(
        tokens.clone(),
        Vec::new(),
        req.translation.trim().to_string(),
        state.config.language.clone(),
        Split::Test,
    );
    let store = if req.use_instructions {
        Some(state.instructions.read().unwrap().store.clone())
    } else {
        None
    };
    let config = &state.config.prompt;

    let mut out = Vec::with_capacity(tokens.len());
    match &state.gateway {
        Some(gateway) => {
            let results = join_all(
                (0..tokens.len())
                    .map(|pos| gloss_word(index, gateway, &entry, pos, store.as_ref(), config)),
            )
            .await;
            for (pos, r) in results.into_iter().enumerate() {
                let r = r.map_err(ApiError::pipeline)?;
                let source = match r.outcome {
                    WordOutcome::Glossed { .. } => "llm",
                    WordOutcome::Fallback { .. } => "fallback",
                };
                out.push(json!({
                    "position": pos,
                    "word": tokens[pos],
                    "kbest": r.outcome.glosses(),
                    "source": source,
                    "injectedPair": r.bundle.injected_pair,
                    "evidence": r.bundle.evidence,
                }));
            }
        }
        None => {
            for (pos, word) in tokens.iter().enumerate() {
                let bundle = build_gloss_prompt(index, &entry, pos, None, config)
                    .map_err(|e| ApiError::bad_request(e.to_string()))?;
                out.push(json!({
                    "position": pos,
                    "word": word,
                    "kbest": retrieval_kbest(index, word),
                    "source": "retrieval",
                    "injectedPair": Value::Null,
                    "evidence": bundle.evidence,
                }));
            }
        }
    }
    let key = entry_key(&tokens, &entry.translation);
    state
        .pending
        .lock()
        .unwrap()
        .remember(key.clone(), tokens, entry.translation);
    Ok(Json(json!({
        "schemaVersion": SCHEMA_VERSION,
        "machineGenerated": true,
        "snapshotId": snap.id(),
        "entryRef": key,
        "tokens": out,
    })))
}

async fn handle_feedback(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let record: FeedbackRecord = parse_body(&body)?;
    let (key, snap, word) = state.record_feedback(record).await?;
    let dist = snap.index.distribution(&word);
    let total: usize = dist.iter().map(|g| g.count).sum();
    let distribution: Vec<Value> = dist
        .iter()
        .map(|g| json!({ "gloss": g.gloss, "count": g.count, "percent": g.rounded_percent(total) }))
        .collect();
    Ok(Json(json!({
        "schemaVersion": SCHEMA_VERSION,
        "snapshotId": snap.id(),
        "entryRef": key,
        "word": word,
        "distribution": distribution,
        "feedbackRecords": snap.feedback_records,
    })))
}

async fn handle_evidence(
    State(state): State<Arc<AppState>>,
    UrlPath(word): UrlPath<String>,
) -> Json<Value> {
    let snap = state.snapshot();
    let evidence = word_evidence(&snap.index, &word, &state.config.prompt);
    Json(json!({
        "schemaVersion": SCHEMA_VERSION,
        "machineGenerated": true,
        "snapshotId": snap.id(),
        "frequency": snap.index.frequency(&word),
        "evidence": evidence,
    }))
}

#[derive(Debug, Deserialize)]
struct TopQuery {
    top: Option<usize>,
}

async fn handle_confusions(
    State(state): State<Arc<AppState>>,
    Query(q): Query<TopQuery>,
) -> Json<Value> {
    let top = q.top.unwrap_or(5);
    let (pairs, token_errors, cvb_any) = match &state.confusions {
        Some(m) => {
            let pairs: Vec<Value> = m
                .top(top)
                .into_iter()
                .map(|(p, c)| json!({ "a": p.a, "b": p.b, "count": c }))
                .collect();
            (pairs, m.token_errors, m.element_aggregate("CVB"))
        }
        None => (Vec::new(), 0, 0),
    };
    Json(json!({
        "schemaVersion": SCHEMA_VERSION,
        "loaded": state.confusions.is_some(),
        "pairs": pairs,
        "tokenErrors": token_errors,
        "cvbAny": cvb_any,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct GenerateRequest {
    a: String,
    b: String,
    #[serde(default)]
    dev_confusion_count: Option<usize>,
    #[serde(default)]
    max_instances: Option<usize>,
}

async fn handle_generate(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: GenerateRequest = parse_body(&body)?;
    let gateway = state.gateway.as_ref().ok_or_else(|| {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "no-gateway",
            "no gateway configured",
        )
    })?;
    let count = req
        .dev_confusion_count
        .or_else(|| state.confusions.as_ref().map(|m| m.count(&req.a, &req.b)))
        .unwrap_or(0);
    let pair = TagPair::new(&req.a, &req.b, count);
    let snap = state.snapshot();
    let max = req
        .max_instances
        .unwrap_or(state.config.max_instances)
        .max(1);
    let set = generate_instructions(gateway, &snap.index, &pair, max, &state.config.language)
        .await
        .map_err(|e| match e {
            StoreError::Gateway(g) => {
                ApiError::new(StatusCode::BAD_GATEWAY, g.kind(), g.to_string())
            }
            StoreError::NoInstances(..) => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "no-instances",
                e.to_string(),
            ),
            StoreError::EmptyText => {
                ApiError::new(StatusCode::BAD_GATEWAY, "empty-response", e.to_string())
            }
            other => ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "storage",
                other.to_string(),
            ),
        })?;
    {
        let mut ins = state.instructions.write().unwrap();
        if let Some(dir) = &ins.dir {
            dir.save(&set).map_err(|e| {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
            })?;
        }
        ins.sets.retain(|s| s.pair.key() != set.pair.key());
        ins.sets.push(set.clone());
        ins.sets.sort_by_key(|x| x.pair.key());
        ins.store.insert(set.pair.clone(), set.text.clone());
    }
    Ok(Json(json!({
        "schemaVersion": SCHEMA_VERSION,
        "machineGenerated": true,
        "instructionSet": set,
    })))
}

async fn handle_instructions(State(state): State<Arc<AppState>>) -> Json<Value> {
    let ins = state.instructions.read().unwrap();
    Json(json!({
        "schemaVersion": SCHEMA_VERSION,
        "machineGenerated": true,
        "instructions": ins.sets,
    }))
}

async fn handle_health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let snap = state.snapshot();
    Json(json!({
        "schemaVersion": SCHEMA_VERSION,
        "status": "ok",
        "snapshotId": snap.id(),
        "language": state.config.language,
        "trainingEntries": state.base.len(),
        "feedbackRecords": snap.feedback_records,
        "gateway": state.gateway.as_ref().map(|g| g.backend_name().to_string()),
    }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/gloss", post(handle_gloss))
        .route("/api/feedback", post(handle_feedback))
        .route("/api/evidence/{word}", get(handle_evidence))
        .route("/api/confusions", get(handle_confusions))
        .route("/api/instructions/generate", post(handle_generate))
        .route("/api/instructions", get(handle_instructions))
        .route("/api/health", get(handle_health))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
