mod common;

use std::sync::Arc;

use common::*;
use glossa::feedback_log::{fold_igt_log, FeedbackLog};
use glossa::gateway::{Gateway, GatewayConfig, GatewayError, MockBackend};
use glossa::store::{generate_instructions, InstructionDir, StoreError};
use glossa_core::feedback::{FeedbackTarget, Origin};
use glossa_core::instructions::TagPair;
use glossa_core::FeedbackRecord;

const ANSWER: &str = "Use PFV.CVB when another verb follows in the same sentence.";

fn gateway(mock: MockBackend, cache: Option<&std::path::Path>, cap: Option<u64>) -> Gateway {
    let config = GatewayConfig {
        model: "mock".into(),
        cache_dir: cache.map(|p| p.to_path_buf()),
        cost_cap: cap,
        ..GatewayConfig::default()
    };
    Gateway::new(config, Arc::new(mock)).unwrap()
}

fn pair() -> TagPair {
    TagPair::new("PST.UNW", "PFV.CVB", 13)
}

#[tokio::test]
async fn instruction_sets_round_trip_through_the_dir() {
    let dir = tempfile::tempdir().unwrap();
    let g = gateway(MockBackend::new().default_response(ANSWER), None, None);
    let set = generate_instructions(&g, &hide_index(), &pair(), 8, "ddo")
        .await
        .unwrap();
    assert_eq!(set.text, ANSWER);
    assert_eq!(set.provenance.model, "mock");
    assert_eq!(set.provenance.temperature, 0.25);
    assert!(set.instance_count > 0 && set.instance_count <= 8);

    let store_dir = InstructionDir::new(dir.path(), "ddo-train");
    store_dir.save(&set).unwrap();
    assert!(store_dir.path().join("PFV.CVB__PST.UNW.txt").exists());
    let loaded = store_dir.load().unwrap();
    assert_eq!(loaded, vec![set.clone()]);
    let store = store_dir.load_store().unwrap();
    assert_eq!(store.get("PST.UNW", "PFV.CVB").unwrap().text, ANSWER);

    // saving the same pair again replaces it
    let mut newer = set.clone();
    newer.text = "Replaced.".into();
    store_dir.save(&newer).unwrap();
    assert_eq!(store_dir.load().unwrap(), vec![newer]);
}

#[tokio::test]
async fn a_budget_failure_stores_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let g = gateway(MockBackend::new().default_response(ANSWER), None, Some(0));
    let err = generate_instructions(&g, &hide_index(), &pair(), 8, "ddo")
        .await
        .unwrap_err();
    assert!(
        matches!(err, StoreError::Gateway(GatewayError::Budget { .. })),
        "{err:?}"
    );
    let store_dir = InstructionDir::new(dir.path(), "ddo-train");
    assert!(store_dir.load().unwrap().is_empty());
    assert!(!store_dir.path().exists());
}

#[tokio::test]
async fn regeneration_from_cache_keeps_the_text() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let first = generate_instructions(
        &gateway(
            MockBackend::new().default_response(ANSWER),
            Some(&cache),
            None,
        ),
        &hide_index(),
        &pair(),
        8,
        "ddo",
    )
    .await
    .unwrap();
    tokio::time::sleep(std::time::Duration::from_millis(5)).await;
    // a backend that would answer differently is never reached
    let mock = Arc::new(MockBackend::new().default_response("something else"));
    let config = GatewayConfig {
        model: "mock".into(),
        cache_dir: Some(cache),
        ..GatewayConfig::default()
    };
    let g = Gateway::new(config, mock.clone()).unwrap();
    let second = generate_instructions(&g, &hide_index(), &pair(), 8, "ddo")
        .await
        .unwrap();
    assert_eq!(mock.calls(), 0);
    assert_eq!(second.text, first.text);
    assert_eq!(second.provenance.prompt_hash, first.provenance.prompt_hash);
    assert_ne!(second.provenance.timestamp, first.provenance.timestamp);
}

#[tokio::test]
async fn pairs_without_instances_are_refused() {
    let g = gateway(MockBackend::new().default_response(ANSWER), None, None);
    let err = generate_instructions(
        &g,
        &hide_index(),
        &TagPair::new("NOPE", "NEVER", 9),
        8,
        "ddo",
    )
    .await
    .unwrap_err();
    assert!(matches!(err, StoreError::NoInstances(..)));
}

fn record(tokens: &[&str], translation: &str, pos: usize, gloss: &str) -> FeedbackRecord {
    FeedbackRecord {
        target: FeedbackTarget::New {
            transcription: tokens.iter().map(|s| s.to_string()).collect(),
            translation: translation.into(),
        },
        position: pos,
        accepted_gloss: gloss.into(),
        annotator_id: "ann".into(),
        timestamp: "2026-01-01T00:00:00Z".into(),
        origin: Origin::ManualEdit,
    }
}

#[test]
fn feedback_log_appends_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let log = FeedbackLog::open(&dir.path().join("fb")).unwrap();
    assert!(log.read_records().unwrap().is_empty());

    let a = record(&["mec", "boƛik’no"], "tongue out", 0, "tongue");
    let first = entry("mec boƛik’no", "tongue ?", "tongue out");
    log.append(&a, &first).unwrap();
    let b = record(
        &["mec", "boƛik’no"],
        "tongue out",
        1,
        "III-push.out-PFV.CVB",
    );
    let second = entry("mec boƛik’no", "tongue III-push.out-PFV.CVB", "tongue out");
    log.append(&b, &second).unwrap();
    let c = record(&["uqʼno"], "hid", 0, "hide-PST.UNW");
    log.append(&c, &entry("uqʼno", "hide-PST.UNW", "hid"))
        .unwrap();

    assert_eq!(log.read_records().unwrap(), vec![a, b, c]);
    let folded = fold_igt_log(&std::fs::read_to_string(log.igt_path()).unwrap(), "ddo");
    assert_eq!(folded.len(), 2);
    assert_eq!(folded[0].gloss_line, ["tongue", "III-push.out-PFV.CVB"]);
    assert_eq!(folded[1].transcription, ["uqʼno"]);
}

#[test]
fn corrupt_record_lines_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let log = FeedbackLog::open(dir.path()).unwrap();
    std::fs::write(log.records_path(), "{\"not\": \"a record\"}\n").unwrap();
    let err = log.read_records().unwrap_err().to_string();
    assert!(err.contains("line 1"), "{err}");
}
