mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::*;
use glossa::feedback_log::FeedbackLog;
use glossa::gateway::{echo_distribution, Gateway, GatewayConfig, MockBackend};
use glossa::service::{router, AppBuilder, AppState, ServiceConfig};
use glossa::store::InstructionDir;
use glossa_core::eval::confusion_matrix;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn mock_gateway(mock: MockBackend) -> Arc<Gateway> {
    let config = GatewayConfig {
        model: "mock".into(),
        backoff_base_ms: 1,
        backoff_max_ms: 2,
        ..GatewayConfig::default()
    };
    Arc::new(Gateway::new(config, Arc::new(mock)).unwrap())
}

fn config() -> ServiceConfig {
    let mut c = ServiceConfig::new("ddo");
    c.seed = HIDE_SEED;
    c
}

async fn call(
    state: &Arc<AppState>,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn hide_request() -> Value {
    let t = hide_target();
    json!({ "tokens": t.transcription, "translation": t.translation })
}

fn mec_feedback(gloss: &str) -> Value {
    json!({
        "target": { "transcription": ["maħor", "mec", "boƛik’no"], "translation": "she poked her tongue out" },
        "position": 1,
        "acceptedGloss": gloss,
        "annotatorId": "ann-1",
        "origin": { "kind": "manual-edit" },
    })
}

#[tokio::test]
async fn gloss_with_mock_returns_distribution_head() {
    let state = AppBuilder::new(config(), hide_train())
        .gateway(mock_gateway(
            MockBackend::new().responder(echo_distribution),
        ))
        .build()
        .unwrap();
    let (status, body) = call(&state, "POST", "/api/gloss", Some(hide_request())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["schemaVersion"], 1);
    assert_eq!(body["machineGenerated"], true);
    let tokens = body["tokens"].as_array().unwrap();
    assert_eq!(tokens.len(), 8);
    assert_eq!(tokens[7]["word"], "uqʼno");
    assert_eq!(tokens[7]["source"], "llm");
    assert_eq!(tokens[7]["kbest"][0], "hide-PST.UNW");
    assert_eq!(tokens[7]["kbest"][1], "hide-PFV.CVB");
    assert!(tokens[7]["evidence"].is_object());
}

#[tokio::test]
async fn sentence_field_is_tokenized() {
    let state = AppBuilder::new(config(), hide_train()).build().unwrap();
    let (status, body) = call(
        &state,
        "POST",
        "/api/gloss",
        Some(json!({ "sentence": "roƛik’no  uqʼno" })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let words: Vec<&str> = body["tokens"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["word"].as_str().unwrap())
        .collect();
    assert_eq!(words, ["roƛik’no", "uqʼno"]);
}

#[tokio::test]
async fn empty_input_is_rejected() {
    let state = AppBuilder::new(config(), hide_train()).build().unwrap();
    let (status, body) = call(&state, "POST", "/api/gloss", Some(json!({ "tokens": [] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "invalid-request");
    let (status, _) = call(
        &state,
        "POST",
        "/api/gloss",
        Some(json!({ "tokens": ["a b"] })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn without_gateway_retrieval_answers() {
    let state = AppBuilder::new(config(), hide_train()).build().unwrap();
    let (status, body) = call(&state, "POST", "/api/gloss", Some(hide_request())).await;
    assert_eq!(status, StatusCode::OK);
    for t in body["tokens"].as_array().unwrap() {
        assert_eq!(t["source"], "retrieval");
        let k = t["kbest"].as_array().unwrap();
        assert!(!k.is_empty() && k.len() <= 3);
    }
    assert_eq!(body["tokens"][7]["kbest"][0], "hide-PST.UNW");
    let (_, unseen) = call(
        &state,
        "POST",
        "/api/gloss",
        Some(json!({ "sentence": "qqqzx" })),
    )
    .await;
    assert_eq!(unseen["tokens"][0]["kbest"], json!(["?"]));
}

#[tokio::test]
async fn feedback_updates_distribution_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppBuilder::new(ServiceConfig::new("ddo"), tongue_train())
        .feedback_log(FeedbackLog::open(dir.path()).unwrap())
        .build()
        .unwrap();
    let (_, before) = call(&state, "GET", "/api/health", None).await;
    let (status, body) = call(
        &state,
        "POST",
        "/api/feedback",
        Some(mec_feedback("tongue")),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["word"], "mec");
    assert_eq!(body["feedbackRecords"], 1);
    let dist = body["distribution"].as_array().unwrap();
    let tongue = dist.iter().find(|d| d["gloss"] == "tongue").unwrap();
    assert_eq!(tongue["count"], 2);
    assert_ne!(body["snapshotId"], before["snapshotId"]);

    let (_, ev) = call(&state, "GET", "/api/evidence/mec", None).await;
    assert_eq!(ev["frequency"], 5);
    assert_eq!(ev["snapshotId"], body["snapshotId"]);
}

#[tokio::test]
async fn invalid_gloss_leaves_log_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let log = FeedbackLog::open(dir.path()).unwrap();
    let state = AppBuilder::new(ServiceConfig::new("ddo"), tongue_train())
        .feedback_log(log.clone())
        .build()
        .unwrap();
    let (_, before) = call(&state, "GET", "/api/health", None).await;
    for bad in ["two words", "", "?"] {
        let (status, body) = call(&state, "POST", "/api/feedback", Some(mec_feedback(bad))).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad:?}");
        assert_eq!(body["error"]["kind"], "invalid-gloss");
    }
    let mut out_of_range = mec_feedback("tongue");
    out_of_range["position"] = json!(9);
    let (status, _) = call(&state, "POST", "/api/feedback", Some(out_of_range)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    assert!(log.read_records().unwrap().is_empty());
    assert!(!log.igt_path().exists());
    let (_, after) = call(&state, "GET", "/api/health", None).await;
    assert_eq!(after["snapshotId"], before["snapshotId"]);
    assert_eq!(after["feedbackRecords"], 0);
}

#[tokio::test]
async fn concurrent_feedback_is_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let log = FeedbackLog::open(dir.path()).unwrap();
    let state = AppBuilder::new(ServiceConfig::new("ddo"), tongue_train())
        .feedback_log(log.clone())
        .build()
        .unwrap();
    let mut second = mec_feedback("III-push.out-PFV.CVB");
    second["position"] = json!(2);
    let (a, b) = tokio::join!(
        call(
            &state,
            "POST",
            "/api/feedback",
            Some(mec_feedback("tongue"))
        ),
        call(&state, "POST", "/api/feedback", Some(second)),
    );
    assert_eq!(a.0, StatusCode::OK);
    assert_eq!(b.0, StatusCode::OK);
    assert_eq!(log.read_records().unwrap().len(), 2);
    let (_, health) = call(&state, "GET", "/api/health", None).await;
    assert_eq!(health["feedbackRecords"], 2);
    let snap = state.snapshot();
    assert_eq!(snap.index.frequency("mec"), 5);
    assert_eq!(snap.index.frequency("boƛik’no"), 3);
}

#[tokio::test]
async fn restart_replays_to_the_same_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let first = AppBuilder::new(ServiceConfig::new("ddo"), tongue_train())
        .feedback_log(FeedbackLog::open(dir.path()).unwrap())
        .build()
        .unwrap();
    call(
        &first,
        "POST",
        "/api/feedback",
        Some(mec_feedback("tongue")),
    )
    .await;
    call(
        &first,
        "POST",
        "/api/feedback",
        Some(mec_feedback("language")),
    )
    .await;
    let live = first.snapshot();

    let second = AppBuilder::new(ServiceConfig::new("ddo"), tongue_train())
        .feedback_log(FeedbackLog::open(dir.path()).unwrap())
        .build()
        .unwrap();
    let replayed = second.snapshot();
    assert_eq!(replayed.id(), live.id());
    assert_eq!(replayed.feedback_records, 2);
    assert_eq!(
        replayed.index.distribution("mec"),
        live.index.distribution("mec")
    );
}

#[tokio::test]
async fn feedback_on_a_glossed_sentence_by_reference() {
    let dir = tempfile::tempdir().unwrap();
    let log = FeedbackLog::open(dir.path()).unwrap();
    let state = AppBuilder::new(ServiceConfig::new("ddo"), tongue_train())
        .feedback_log(log.clone())
        .build()
        .unwrap();
    let (_, glossed) = call(
        &state,
        "POST",
        "/api/gloss",
        Some(
            json!({ "sentence": "maħor mec boƛik’no", "translation": "she poked her tongue out" }),
        ),
    )
    .await;
    let entry_ref = glossed["entryRef"].as_str().unwrap().to_string();
    let record = json!({
        "target": { "entryRef": entry_ref },
        "position": 1,
        "acceptedGloss": "tongue",
        "annotatorId": "ann-2",
        "origin": { "kind": "accepted-suggestion", "rank": 2 },
    });
    let (status, body) = call(&state, "POST", "/api/feedback", Some(record)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["entryRef"], entry_ref.as_str());

    // the log carries the whole sentence, so a restart replays it
    let restarted = AppBuilder::new(ServiceConfig::new("ddo"), tongue_train())
        .feedback_log(FeedbackLog::open(dir.path()).unwrap())
        .build()
        .unwrap();
    assert_eq!(restarted.snapshot().id(), state.snapshot().id());

    let unknown = json!({
        "target": { "entryRef": "0000" },
        "position": 0,
        "acceptedGloss": "tongue",
        "annotatorId": "ann-2",
        "origin": { "kind": "manual-edit" },
    });
    let (status, body) = call(&state, "POST", "/api/feedback", Some(unknown)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "unknown-entry");
    assert_eq!(log.read_records().unwrap().len(), 1);
}

#[tokio::test]
async fn health_and_confusions() {
    let state = AppBuilder::new(config(), hide_train()).build().unwrap();
    let (status, health) = call(&state, "GET", "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(health["status"], "ok");
    assert_eq!(health["language"], "ddo");
    assert_eq!(health["trainingEntries"], 40);
    assert!(health["gateway"].is_null());
    let (_, conf) = call(&state, "GET", "/api/confusions", None).await;
    assert_eq!(conf["loaded"], false);

    let gold = vec![hide_target()];
    let mut pred = vec![gold[0].gloss_line.clone()];
    pred[0][7] = "hide-PFV.CVB".into();
    let matrix = confusion_matrix(&pred, &gold).unwrap();
    let state = AppBuilder::new(config(), hide_train())
        .confusions(matrix)
        .build()
        .unwrap();
    let (_, conf) = call(&state, "GET", "/api/confusions?top=3", None).await;
    assert_eq!(conf["loaded"], true);
    assert_eq!(conf["tokenErrors"], 1);
    assert_eq!(conf["cvbAny"], 1);
    assert_eq!(conf["pairs"][0]["count"], 1);
}

#[tokio::test]
async fn instruction_generation_paths() {
    let pair = json!({ "a": "PFV.CVB", "b": "PST.UNW", "devConfusionCount": 13 });

    let offline = AppBuilder::new(config(), hide_train()).build().unwrap();
    let (status, body) = call(
        &offline,
        "POST",
        "/api/instructions/generate",
        Some(pair.clone()),
    )
    .await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"]["kind"], "no-gateway");

    let dir = tempfile::tempdir().unwrap();
    let answer =
        "Certainly! Here are some rules\n1. Use PST.UNW for a finite verb ending the clause.";
    let state = AppBuilder::new(config(), hide_train())
        .gateway(mock_gateway(MockBackend::new().default_response(answer)))
        .instruction_dir(InstructionDir::new(dir.path(), "ddo"))
        .build()
        .unwrap();
    let (status, body) = call(
        &state,
        "POST",
        "/api/instructions/generate",
        Some(json!({ "a": "NOPE", "b": "NEVER" })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["kind"], "no-instances");

    let (status, body) = call(&state, "POST", "/api/instructions/generate", Some(pair)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["machineGenerated"], true);
    // stored verbatim, preamble included
    assert_eq!(body["instructionSet"]["text"], answer);
    assert_eq!(body["instructionSet"]["provenance"]["temperature"], 0.25);

    let (_, listed) = call(&state, "GET", "/api/instructions", None).await;
    assert_eq!(listed["instructions"].as_array().unwrap().len(), 1);
    let saved = InstructionDir::new(dir.path(), "ddo").load().unwrap();
    assert_eq!(saved.len(), 1);
    assert_eq!(saved[0].text, answer);
}

#[tokio::test]
async fn gateway_failure_maps_to_bad_gateway() {
    let config_gw = GatewayConfig {
        model: "mock".into(),
        cost_cap: Some(0),
        ..GatewayConfig::default()
    };
    let gw = Arc::new(Gateway::new(config_gw, Arc::new(MockBackend::new())).unwrap());
    let state = AppBuilder::new(config(), hide_train())
        .gateway(gw)
        .build()
        .unwrap();
    let (status, body) = call(&state, "POST", "/api/gloss", Some(hide_request())).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(body["error"]["kind"], "budget");
}

#[tokio::test]
async fn cors_preflight_is_allowed() {
    let state = AppBuilder::new(config(), hide_train()).build().unwrap();
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/gloss")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = router(state).oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}
