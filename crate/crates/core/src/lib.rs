//! Core algorithms for retrieval-assisted interlinear glossing.
//!
//! Everything here is pure and allocation-only: corpus parsing, the
//! retrieval indices, the retrieval baseline, prompt assembly, model
//! response parsing, scoring, and confusable-tag mining. IO, networking and
//! the command line live in the `glossa` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod feedback;
pub mod gloss;
pub mod igt;
pub mod index;
pub mod instructions;
pub mod language;
pub mod lcs;
pub mod prompt;
pub mod response;
pub mod retrieval;
pub mod run;
pub mod template;

pub use error::{ContractError, EvalError, GlossError, ParseError, ResponseError};
pub use eval::{evaluate, ConfusionMatrix, EvalReport, MorphemeDenominator};
pub use feedback::{FeedbackCorpus, FeedbackRecord};
pub use gloss::{parse_word_gloss, TagSignature, WordGloss};
pub use igt::{parse_corpus, serialize_entry, IgtEntry, ParsedCorpus, Split};
pub use index::{build_index, CorpusIndex};
pub use instructions::{InstructionStore, TagPair};
pub use prompt::{build_gloss_prompt, PromptBundle, PromptConfig};
pub use response::{parse_llm_response, KBestGlosses};
pub use run::{GlossRun, RunMode};
