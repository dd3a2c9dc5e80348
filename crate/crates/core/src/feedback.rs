//! Annotator feedback as an event log over a growing corpus.
//!
//! Each accepted gloss fills one slot of a sentence. Sentences are keyed by
//! a hash of their tokens and translation; unresolved slots hold `?`, which
//! the index never counts. Folding the same records in the same order always
//! yields the same corpus.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GlossError;
use crate::gloss::parse_word_gloss;
use crate::igt::{IgtEntry, Split};
use crate::index::{hex, UNKNOWN_GLOSS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Origin {
    AcceptedSuggestion { rank: u8 },
    ManualEdit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", untagged)]
pub enum FeedbackTarget {
    Existing {
        #[serde(rename = "entryRef")]
        entry_ref: String,
    },
    New {
        transcription: Vec<String>,
        translation: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackRecord {
    pub target: FeedbackTarget,
    pub position: usize,
    pub accepted_gloss: String,
    pub annotator_id: String,
    /// RFC 3339, stamped by whoever writes the log.
    #[serde(default)]
    pub timestamp: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeedbackError {
    #[error("invalid gloss: {0}")]
    InvalidGloss(#[from] GlossError),
    #[error("suggestion rank {0} is not 1, 2 or 3")]
    BadRank(u8),
    #[error("position {pos} out of range for a {len}-token sentence")]
    PositionOutOfRange { pos: usize, len: usize },
    #[error("unknown entry {0}")]
    UnknownEntry(String),
    #[error("`?` cannot be accepted as a gloss")]
    Unresolved,
    #[error("sentence has no tokens")]
    EmptySentence,
}

impl FeedbackRecord {
    /// Checks everything that does not depend on corpus state.
    pub fn validate(&self) -> Result<(), FeedbackError> {
        if self.accepted_gloss == UNKNOWN_GLOSS {
            return Err(FeedbackError::Unresolved);
        }
        parse_word_gloss(&self.accepted_gloss)?;
        if let Origin::AcceptedSuggestion { rank } = self.origin {
            if !(1..=3).contains(&rank) {
                return Err(FeedbackError::BadRank(rank));
            }
        }
        if let FeedbackTarget::New { transcription, .. } = &self.target {
            if transcription.is_empty() {
                return Err(FeedbackError::EmptySentence);
            }
            if self.position >= transcription.len() {
                return Err(FeedbackError::PositionOutOfRange {
                    pos: self.position,
                    len: transcription.len(),
                });
            }
        }
        Ok(())
    }
}

/// Stable identity of a sentence: its tokens and translation.
pub fn entry_key(transcription: &[String], translation: &str) -> String {
    let mut h = Sha256::new();
    for t in transcription {
        h.update(t.as_bytes());
        h.update([0x1f]);
    }
    h.update([0x1e]);
    h.update(translation.as_bytes());
    let digest = h.finalize();
    hex(&digest[..8])
}

/// The sentences built up from feedback, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeedbackCorpus {
    language: String,
    entries: Vec<IgtEntry>,
    keys: BTreeMap<String, usize>,
    applied: usize,
}

impl FeedbackCorpus {
    pub fn new(language: impl Into<String>) -> Self {
        FeedbackCorpus {
            language: language.into(),
            ..Self::default()
        }
    }

    pub fn entries(&self) -> &[IgtEntry] {
        &self.entries
    }

    pub fn applied(&self) -> usize {
        self.applied
    }

    pub fn key_of(&self, id: usize) -> Option<&str> {
        self.keys
            .iter()
            .find(|(_, &v)| v == id)
            .map(|(k, _)| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&IgtEntry> {
        self.keys.get(key).map(|&i| &self.entries[i])
    }

    /// Resolves the target slot without changing anything.
    pub fn check(&self, record: &FeedbackRecord) -> Result<String, FeedbackError> {
        record.validate()?;
        match &record.target {
            FeedbackTarget::Existing { entry_ref } => {
                let entry = self
                    .get(entry_ref)
                    .ok_or_else(|| FeedbackError::UnknownEntry(entry_ref.clone()))?;
                if record.position >= entry.transcription.len() {
                    return Err(FeedbackError::PositionOutOfRange {
                        pos: record.position,
                        len: entry.transcription.len(),
                    });
                }
                Ok(entry_ref.clone())
            }
            FeedbackTarget::New {
                transcription,
                translation,
            } => Ok(entry_key(transcription, translation.trim())),
        }
    }

    /// Applies one record and returns the key of the sentence it touched.
    pub fn apply(&mut self, record: &FeedbackRecord) -> Result<String, FeedbackError> {
        let key = self.check(record)?;
        let id = match self.keys.get(&key) {
            Some(&id) => id,
            None => {
                let FeedbackTarget::New {
                    transcription,
                    translation,
                } = &record.target
                else {
                    return Err(FeedbackError::UnknownEntry(key));
                };
                let gloss_line = vec![UNKNOWN_GLOSS.to_string(); transcription.len()];
                self.entries.push(IgtEntry::new(
                    transcription.clone(),
                    gloss_line,
                    translation.trim().to_string(),
                    self.language.clone(),
                    Split::Train,
                ));
                self.keys.insert(key.clone(), self.entries.len() - 1);
                self.entries.len() - 1
            }
        };
        self.entries[id].gloss_line[record.position] = record.accepted_gloss.clone();
        self.applied += 1;
        Ok(key)
    }

    pub fn replay<'a>(
        language: &str,
        records: impl IntoIterator<Item = &'a FeedbackRecord>,
    ) -> Result<FeedbackCorpus, FeedbackError> {
        let mut corpus = FeedbackCorpus::new(language);
        for r in records {
            corpus.apply(r)?;
        }
        Ok(corpus)
    }
}

/// Base training corpus followed by the feedback sentences.
pub fn dynamic_corpus(base: &[IgtEntry], feedback: &FeedbackCorpus) -> Vec<IgtEntry> {
    base.iter().chain(feedback.entries()).cloned().collect()
}
