#![allow(dead_code)]

use glossa_core::index::{build_index_with, IndexOptions};
use glossa_core::{parse_corpus, CorpusIndex, IgtEntry, Split};

/// Sampling seed under which the hide fixture yields the stored golden prompt.
pub const HIDE_SEED: u64 = 1397;

pub fn fixture(name: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/");
    std::fs::read_to_string(format!("{path}{name}")).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn hide_train() -> Vec<IgtEntry> {
    let parsed = parse_corpus(&fixture("ddo-hide-train.txt"), "ddo", Split::Train);
    assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
    parsed.entries
}

pub fn hide_index() -> CorpusIndex {
    build_index_with(&hide_train(), &IndexOptions { seed: HIDE_SEED })
}

pub fn hide_target() -> IgtEntry {
    let parsed = parse_corpus(&fixture("ddo-hide-target.txt"), "ddo", Split::Test);
    parsed.entries.into_iter().next().expect("one target entry")
}

pub fn entry(t: &str, g: &str, l: &str) -> IgtEntry {
    IgtEntry::new(
        t.split_whitespace().map(String::from).collect(),
        g.split_whitespace().map(String::from).collect(),
        l,
        "ddo",
        Split::Train,
    )
}
