#![allow(dead_code)]

use std::path::PathBuf;

use glossa_core::index::{build_index_with, IndexOptions};
use glossa_core::{parse_corpus, CorpusIndex, IgtEntry, Split};

pub const HIDE_SEED: u64 = 1397;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn hide_train() -> Vec<IgtEntry> {
    parse_corpus(&fixture("ddo-hide-train.txt"), "ddo", Split::Train).entries
}

pub fn hide_index() -> CorpusIndex {
    build_index_with(&hide_train(), &IndexOptions { seed: HIDE_SEED })
}

pub fn hide_target() -> IgtEntry {
    parse_corpus(&fixture("ddo-hide-target.txt"), "ddo", Split::Test)
        .entries
        .remove(0)
}

pub fn entry(t: &str, g: &str, l: &str) -> IgtEntry {
    IgtEntry::new(
        t.split_whitespace().map(String::from).collect(),
        g.split_whitespace().map(String::from).collect(),
        l,
        "ddo",
        Split::Test,
    )
}

/// Tsez training data where `mec` is mostly "language".
pub fn tongue_train() -> Vec<IgtEntry> {
    let mut v = vec![
        entry(
            "maħor mec boƛik’no",
            "outside tongue III-push.out-PFV.CVB",
            "it stuck its tongue out",
        ),
        entry("boƛik’no", "III-push.out-PFV.CVB", "having pushed it out"),
    ];
    for l in [
        "she speaks our language",
        "a hard language",
        "the language of the mountains",
    ] {
        v.push(entry("mec", "language", l));
    }
    v
}

pub fn tongue_target() -> IgtEntry {
    entry(
        "maħor mec boƛik’no",
        "outside tongue III-push.out-PST.UNW",
        "she poked her tongue out",
    )
}

/// Test-sized corpus built from the hide fixture: every third entry.
pub fn hide_test_corpus() -> Vec<IgtEntry> {
    let mut out: Vec<IgtEntry> = hide_train().into_iter().step_by(3).collect();
    out.push(hide_target());
    for e in &mut out {
        e.split = Split::Test;
    }
    out
}

pub mod data;
