//! Glossing run records and their JSON-lines artifact.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eval::oracle_select;
use crate::igt::IgtEntry;
use crate::index::UNKNOWN_GLOSS;
use crate::instructions::TagPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    #[serde(rename = "retrieval")]
    Retrieval,
    #[serde(rename = "llm")]
    Llm,
    #[serde(rename = "llm+instructions")]
    LlmInstructions,
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "retrieval" => Ok(RunMode::Retrieval),
            "llm" => Ok(RunMode::Llm),
            "llm+instructions" => Ok(RunMode::LlmInstructions),
            other => Err(alloc::format!("unknown mode {other:?}")),
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Retrieval => "retrieval",
            RunMode::Llm => "llm",
            RunMode::LlmInstructions => "llm+instructions",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    MalformedResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WordRecord {
    pub entry: usize,
    pub pos: usize,
    pub word: String,
    pub glosses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected_pair: Option<TagPair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WordFailure {
    pub entry: usize,
    pub pos: usize,
    pub word: String,
    pub kind: FailureKind,
    /// Retrieval gloss (or `?`) used in place of a model answer.
    pub fallback: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunHeader {
    pub corpus_ref: String,
    pub mode: RunMode,
    pub snapshot_id: String,
    pub template_version: String,
    /// Leading corpus entries covered by the run.
    pub entry_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RunLine {
    Header(RunHeader),
    Word(WordRecord),
    Failure(WordFailure),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlossRun {
    pub header: RunHeader,
    pub per_word: BTreeMap<(usize, usize), WordRecord>,
    pub failures: BTreeMap<(usize, usize), WordFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunFormatError {
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("run artifact has no header line")]
    MissingHeader,
}

impl GlossRun {
    pub fn new(header: RunHeader) -> Self {
        GlossRun {
            header,
            per_word: BTreeMap::new(),
            failures: BTreeMap::new(),
        }
    }

    pub fn insert_word(&mut self, record: WordRecord) {
        let key = (record.entry, record.pos);
        self.failures.remove(&key);
        self.per_word.insert(key, record);
    }

    pub fn insert_failure(&mut self, failure: WordFailure) {
        let key = (failure.entry, failure.pos);
        self.per_word.remove(&key);
        self.failures.insert(key, failure);
    }

    pub fn contains(&self, entry: usize, pos: usize) -> bool {
        self.per_word.contains_key(&(entry, pos)) || self.failures.contains_key(&(entry, pos))
    }

    pub fn len(&self) -> usize {
        self.per_word.len() + self.failures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidate list for a token: model k-best, or the fallback alone.
    pub fn candidates(&self, entry: usize, pos: usize) -> Option<&[String]> {
        if let Some(r) = self.per_word.get(&(entry, pos)) {
            return Some(&r.glosses);
        }
        self.failures
            .get(&(entry, pos))
            .map(|f| core::slice::from_ref(&f.fallback))
    }

    /// First-choice gloss for every token of every entry; tokens missing
    /// from the run get `?`.
    pub fn one_best(&self, corpus: &[IgtEntry]) -> Vec<Vec<String>> {
        corpus
            .iter()
            .enumerate()
            .map(|(i, e)| {
                (0..e.transcription.len())
                    .map(|p| {
                        self.candidates(i, p)
                            .and_then(|c| c.first())
                            .cloned()
                            .unwrap_or_else(|| UNKNOWN_GLOSS.to_string())
                    })
                    .collect()
            })
            .collect()
    }

    /// Per token, the candidate closest to gold by element Jaccard.
    pub fn oracle(&self, gold: &[IgtEntry]) -> Vec<Vec<String>> {
        gold.iter()
            .enumerate()
            .map(|(i, e)| {
                (0..e.transcription.len())
                    .map(|p| {
                        let g = e.gloss_line.get(p).map(String::as_str).unwrap_or("");
                        self.candidates(i, p)
                            .and_then(|c| oracle_select(c, g))
                            .unwrap_or(UNKNOWN_GLOSS)
                            .to_string()
                    })
                    .collect()
            })
            .collect()
    }

    /// Header line, then one line per token in (entry, position) order.
    pub fn to_jsonl(&self) -> String {
        let mut lines: Vec<(usize, usize, RunLine)> = Vec::new();
        for (k, r) in &self.per_word {
            lines.push((k.0, k.1, RunLine::Word(r.clone())));
        }
        for (k, f) in &self.failures {
            lines.push((k.0, k.1, RunLine::Failure(f.clone())));
        }
        lines.sort_by_key(|(e, p, _)| (*e, *p));
        let mut out = line_json(&RunLine::Header(self.header.clone()));
        for (_, _, l) in lines {
            out.push_str(&line_json(&l));
        }
        out
    }

    /// Parses an artifact. Later lines for the same token replace earlier
    /// ones, so an appended checkpoint file reads back correctly.
    pub fn from_jsonl(text: &str) -> Result<GlossRun, RunFormatError> {
        let mut run: Option<GlossRun> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RunLine =
                serde_json::from_str(line).map_err(|e| RunFormatError::BadLine {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            match parsed {
                RunLine::Header(h) => {
                    if run.is_none() {
                        run = Some(GlossRun::new(h));
                    }
                }
                RunLine::Word(w) => run
                    .as_mut()
                    .ok_or(RunFormatError::MissingHeader)?
                    .insert_word(w),
                RunLine::Failure(f) => run
                    .as_mut()
                    .ok_or(RunFormatError::MissingHeader)?
                    .insert_failure(f),
            }
        }
        run.ok_or(RunFormatError::MissingHeader)
    }
}

pub fn line_json(line: &RunLine) -> String {
    let mut s = serde_json::to_string(line).expect("run line serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::igt::Split;
    use alloc::vec;

    fn header() -> RunHeader {
        RunHeader {
            corpus_ref: "ddo-test".into(),
            mode: RunMode::Llm,
            snapshot_id: "abc".into(),
            template_version: "v1".into(),
            entry_count: 1,
        }
    }

    fn sample_run() -> GlossRun {
        let mut run = GlossRun::new(header());
        run.insert_word(WordRecord {
            entry: 0,
            pos: 0,
            word: "a".into(),
            glosses: vec!["x-B".into(), "a-A".into()],
            prompt_hash: Some("h0".into()),
            injected_pair: None,
        });
        run.insert_failure(WordFailure {
            entry: 0,
            pos: 1,
            word: "b".into(),
            kind: FailureKind::MalformedResponse,
            fallback: "?".into(),
            prompt_hash: Some("h1".into()),
        });
        run
    }

    #[test]
    fn jsonl_round_trip() {
        let run = sample_run();
        let text = run.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("{\"type\":\"header\""));
        assert_eq!(GlossRun::from_jsonl(&text).unwrap(), run);
    }

    #[test]
    fn one_best_and_oracle() {
        let run = sample_run();
        let gold = vec![IgtEntry::from_lines(
            "a b c",
            "a-A b C",
            "",
            "x",
            Split::Test,
        )];
        assert_eq!(run.one_best(&gold), vec![vec!["x-B", "?", "?"]]);
        assert_eq!(run.oracle(&gold), vec![vec!["a-A", "?", "?"]]);
    }

    #[test]
    fn word_or_failure_never_both() {
        let mut run = sample_run();
        run.insert_word(WordRecord {
            entry: 0,
            pos: 1,
            word: "b".into(),
            glosses: vec!["b".into()],
            prompt_hash: None,
            injected_pair: None,
        });
        assert!(run.failures.is_empty());
        assert_eq!(run.len(), 2);
    }

    #[test]
    fn mode_names() {
        assert_eq!(
            "llm+instructions".parse::<RunMode>().unwrap(),
            RunMode::LlmInstructions
        );
        assert_eq!(RunMode::LlmInstructions.to_string(), "llm+instructions");
        assert!("x".parse::<RunMode>().is_err());
    }
}
