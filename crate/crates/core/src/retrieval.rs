//! The retrieval-only glosser: every token gets its most frequent training
//! gloss, or `?` when it never occurs in training.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ContractError;
use crate::igt::IgtEntry;
use crate::index::{CorpusIndex, UNKNOWN_GLOSS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionSource {
    Retrieval,
    Llm,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePrediction {
    pub entry: usize,
    /// One gloss (or `?`) per transcription token.
    pub predicted: Vec<String>,
    pub source: PredictionSource,
}

pub fn retrieval_gloss<'a>(index: &'a CorpusIndex, token: &str) -> &'a str {
    index.most_frequent_gloss(token).unwrap_or(UNKNOWN_GLOSS)
}

pub fn gloss_sentence_retrieval(
    index: &CorpusIndex,
    entry_id: usize,
    entry: &IgtEntry,
) -> SentencePrediction {
    SentencePrediction {
        entry: entry_id,
        predicted: entry
            .transcription
            .iter()
            .map(|t| retrieval_gloss(index, t).to_string())
            .collect(),
        source: PredictionSource::Retrieval,
    }
}

pub fn gloss_corpus_retrieval(index: &CorpusIndex, corpus: &[IgtEntry]) -> Vec<SentencePrediction> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, e)| gloss_sentence_retrieval(index, i, e))
        .collect()
}

/// Sentence and candidate gloss lines with the target slot bracketed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextCandidate {
    pub sentence: String,
    pub gloss: String,
}

pub fn context_candidate(
    index: &CorpusIndex,
    entry: &IgtEntry,
    target_pos: usize,
) -> Result<ContextCandidate, ContractError> {
    let len = entry.transcription.len();
    if target_pos >= len {
        return Err(ContractError::PositionOutOfRange {
            pos: target_pos,
            len,
        });
    }
    let mut sentence = Vec::with_capacity(len);
    let mut gloss = Vec::with_capacity(len);
    for (pos, token) in entry.transcription.iter().enumerate() {
        if pos == target_pos {
            sentence.push(format!("[{token}]"));
            gloss.push(format!("[{UNKNOWN_GLOSS}]"));
        } else {
            sentence.push(token.clone());
            gloss.push(retrieval_gloss(index, token).to_string());
        }
    }
    Ok(ContextCandidate {
        sentence: sentence.join(" "),
        gloss: gloss.join(" "),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::igt::Split;
    use crate::index::build_index;
    use alloc::vec;

    fn train() -> CorpusIndex {
        let e = |t, g, l| IgtEntry::from_lines(t, g, l, "ddo", Split::Train);
        build_index(&[
            e("maħor mec", "outside language", "outside the language"),
            e("mec boλik'no", "language III-push.out-PFV.CVB", "x"),
            e("mec", "tongue", "tongue"),
            e("boλik'no", "III-push.out-PST.UNW", "y"),
            e("boλik'no", "III-push.out-PFV.CVB", "z"),
        ])
    }

    #[test]
    fn picks_frequent_but_wrong_reading() {
        let idx = train();
        let test = IgtEntry::from_lines(
            "maħor mec boλik'no",
            "outside tongue III-push.out-PST.UNW",
            "she poked her tongue out",
            "ddo",
            Split::Test,
        );
        let p = gloss_sentence_retrieval(&idx, 0, &test);
        assert_eq!(
            p.predicted.join(" "),
            "outside language III-push.out-PFV.CVB"
        );
        assert_eq!(p.source, PredictionSource::Retrieval);
    }

    #[test]
    fn oov_tokens_get_question_mark() {
        let idx = train();
        let test = IgtEntry::from_lines("qq rr", "", "", "ddo", Split::Test);
        assert_eq!(
            gloss_sentence_retrieval(&idx, 3, &test).predicted,
            vec!["?", "?"]
        );
    }

    #[test]
    fn candidate_line_brackets_target() {
        let idx = train();
        let test = IgtEntry::from_lines("maħor zz mec", "", "", "ddo", Split::Test);
        let c = context_candidate(&idx, &test, 2).unwrap();
        assert_eq!(c.sentence, "maħor zz [mec]");
        assert_eq!(c.gloss, "outside ? [?]");
        let single = IgtEntry::from_lines("mec", "", "", "ddo", Split::Test);
        assert_eq!(context_candidate(&idx, &single, 0).unwrap().gloss, "[?]");
        assert_eq!(
            context_candidate(&idx, &single, 1),
            Err(ContractError::PositionOutOfRange { pos: 1, len: 1 })
        );
    }
}
