//! Durable feedback: `feedback.jsonl` holds the records (the replay source)
//! and `feedback.igt` receives the touched sentence's new state after each
//! record, so the latest block per sentence is its current annotation.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use glossa_core::feedback::{entry_key, FeedbackRecord};
use glossa_core::igt::{parse_corpus, serialize_entry, Split};
use glossa_core::IgtEntry;

pub const RECORDS_FILE: &str = "feedback.jsonl";
pub const IGT_FILE: &str = "feedback.igt";

#[derive(Debug, Clone)]
pub struct FeedbackLog {
    records: PathBuf,
    igt: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {message}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn append_to(path: &Path, bytes: &[u8]) -> io::Result<u64> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let before = file.metadata()?.len();
    file.write_all(bytes)?;
    file.sync_data()?;
    Ok(before)
}

fn truncate(path: &Path, len: u64) {
    if let Ok(f) = File::options().write(true).open(path) {
        let _ = f.set_len(len);
    }
}

impl FeedbackLog {
    pub fn open(dir: &Path) -> Result<Self, LogError> {
        fs::create_dir_all(dir).map_err(|source| LogError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(FeedbackLog {
            records: dir.join(RECORDS_FILE),
            igt: dir.join(IGT_FILE),
        })
    }

    pub fn records_path(&self) -> &Path {
        &self.records
    }

    pub fn igt_path(&self) -> &Path {
        &self.igt
    }

    pub fn read_records(&self) -> Result<Vec<FeedbackRecord>, LogError> {
        let text = match fs::read_to_string(&self.records) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => {
                return Err(LogError::Io {
                    path: self.records.clone(),
                    source,
                })
            }
        };
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| LogError::BadRecord {
                    path: self.records.clone(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    /// Appends one record and the sentence state it produced. If the second
    /// write fails the first is rolled back, so both files stay in step.
    pub fn append(&self, record: &FeedbackRecord, entry: &IgtEntry) -> Result<(), LogError> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        let before = append_to(&self.records, line.as_bytes()).map_err(|source| LogError::Io {
            path: self.records.clone(),
            source,
        })?;
        if let Err(source) = append_to(&self.igt, serialize_entry(entry).as_bytes()) {
            truncate(&self.records, before);
            return Err(LogError::Io {
                path: self.igt.clone(),
                source,
            });
        }
        Ok(())
    }
}

/// Folds an IGT feedback log: sentences in first-seen order, each with the
/// gloss line of its latest block.
pub fn fold_igt_log(text: &str, language: &str) -> Vec<IgtEntry> {
    let mut order: Vec<IgtEntry> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for entry in parse_corpus(text, language, Split::Train).entries {
        let key = entry_key(&entry.transcription, &entry.translation);
        match seen.get(&key) {
            Some(&i) => order[i] = entry,
            None => {
                seen.insert(key, order.len());
                order.push(entry);
            }
        }
    }
    order
}
