//! Reading shared-task corpus files.

use std::fs;
use std::path::Path;

use anyhow::Context;
use glossa_core::igt::{parse_corpus, ParsedCorpus, Split};

/// `ddo-train-track1-uncovered` → `ddo`.
pub fn language_from_path(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.split(['-', '_', '.'])
        .next()
        .filter(|s| !s.is_empty())
        .unwrap_or("und")
        .to_string()
}

pub fn split_from_path(path: &Path) -> Split {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    if name.contains("test") {
        Split::Test
    } else if name.contains("dev") {
        Split::Dev
    } else {
        Split::Train
    }
}

/// Parses a corpus file, logging recoverable problems.
pub fn load_corpus(path: &Path, language: Option<&str>) -> anyhow::Result<ParsedCorpus> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let language = language.map_or_else(|| language_from_path(path), str::to_string);
    let parsed = parse_corpus(&text, &language, split_from_path(path));
    for e in &parsed.errors {
        tracing::warn!("{}: {e}", path.display());
    }
    if !parsed.warnings.is_empty() {
        tracing::debug!(
            "{}: {} parse warnings",
            path.display(),
            parsed.warnings.len()
        );
    }
    let misaligned = parsed.misaligned();
    if misaligned > 0 {
        tracing::info!("{}: {misaligned} misaligned entries", path.display());
    }
    Ok(parsed)
}
