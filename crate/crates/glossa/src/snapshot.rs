//! On-disk cache of built indices, keyed by corpus id and format version.

use std::fs;
use std::path::{Path, PathBuf};

use glossa_core::index::{build_index_with, corpus_id, IndexOptions};
use glossa_core::{CorpusIndex, IgtEntry};
use serde::{Deserialize, Serialize};

/// Bumped whenever the serialized index layout changes.
pub const SNAPSHOT_FORMAT: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct StoredSnapshot {
    format: u32,
    index: CorpusIndex,
}

pub fn snapshot_path(dir: &Path, corpus_id: &str, seed: u64) -> PathBuf {
    dir.join(format!("{corpus_id}-s{seed}.v{SNAPSHOT_FORMAT}.json"))
}

/// Loads the cached snapshot for `corpus` or builds and stores it. A stale
/// or unreadable cache file is rebuilt.
pub fn load_or_build(
    dir: Option<&Path>,
    corpus: &[IgtEntry],
    options: &IndexOptions,
) -> std::io::Result<(CorpusIndex, bool)> {
    let Some(dir) = dir else {
        return Ok((build_index_with(corpus, options), false));
    };
    let id = corpus_id(corpus);
    let path = snapshot_path(dir, &id, options.seed);
    if let Ok(text) = fs::read_to_string(&path) {
        match serde_json::from_str::<StoredSnapshot>(&text) {
            Ok(s) if s.format == SNAPSHOT_FORMAT && s.index.corpus_id == id => {
                return Ok((s.index, true));
            }
            _ => tracing::warn!("ignoring stale snapshot {}", path.display()),
        }
    }
    let index = build_index_with(corpus, options);
    fs::create_dir_all(dir)?;
    let stored = StoredSnapshot {
        format: SNAPSHOT_FORMAT,
        index,
    };
    let tmp = path.with_extension("tmp");
    fs::write(
        &tmp,
        serde_json::to_vec(&stored).map_err(std::io::Error::other)?,
    )?;
    fs::rename(&tmp, &path)?;
    Ok((stored.index, false))
}
