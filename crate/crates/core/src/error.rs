use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GlossError {
    #[error("empty gloss")]
    Empty,
    #[error("gloss contains whitespace: {0:?}")]
    Whitespace(String),
}

/// A recoverable problem found while reading a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("block at lines {start}-{end} has no transcription line")]
    MissingTranscription { start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("position {pos} out of range for a sentence of {len} tokens")]
    PositionOutOfRange { pos: usize, len: usize },
    #[error("no contrastive instances supplied")]
    NoInstances,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("entry {entry}: predicted {predicted} tokens, gold has {gold}")]
    LengthMismatch {
        entry: usize,
        predicted: usize,
        gold: usize,
    },
    #[error("{predicted} predicted sentences for {gold} gold entries")]
    CorpusSizeMismatch { predicted: usize, gold: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResponseError {
    #[error("no JSON object with a glosses list found in model response")]
    NoJson { raw: String },
    #[error("model response contained no usable glosses")]
    EmptyGlosses { raw: String },
}

impl ResponseError {
    pub fn raw_response(&self) -> &str {
        match self {
            ResponseError::NoJson { raw } | ResponseError::EmptyGlosses { raw } => raw,
        }
    }
}
