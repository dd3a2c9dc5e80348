//! Word-by-word glossing: prompt, call, parse, and fall back when needed.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use futures::stream::{self, StreamExt};
use glossa_core::index::UNKNOWN_GLOSS;
use glossa_core::instructions::InstructionStore;
use glossa_core::prompt::{
    build_gloss_prompt, format_reminder, select_instructions, PromptBundle, PromptConfig,
};
use glossa_core::response::{parse_llm_response, KBestGlosses};
use glossa_core::retrieval::retrieval_gloss;
use glossa_core::run::{
    line_json, FailureKind, GlossRun, RunHeader, RunLine, RunMode, WordFailure, WordRecord,
};
use glossa_core::template::TEMPLATE_VERSION;
use glossa_core::{ContractError, CorpusIndex, IgtEntry};

use crate::gateway::{ChatRequest, Gateway, GatewayError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("mode {0} needs a gateway")]
    NoGateway(RunMode),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
}

/// Result of glossing one token.
#[derive(Debug, Clone, PartialEq)]
pub enum WordOutcome {
    Glossed {
        kbest: KBestGlosses,
        prompt_hash: String,
    },
    /// Both attempts unreadable; the retrieval gloss stands in.
    Fallback {
        gloss: String,
        raw_responses: Vec<String>,
        prompt_hash: String,
    },
}

impl WordOutcome {
    pub fn glosses(&self) -> Vec<String> {
        match self {
            WordOutcome::Glossed { kbest, .. } => kbest.glosses.clone(),
            WordOutcome::Fallback { gloss, .. } => vec![gloss.clone()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordResult {
    pub bundle: PromptBundle,
    pub outcome: WordOutcome,
}

/// Up to three glosses from the head of the training distribution, or `?`.
pub fn retrieval_kbest(index: &CorpusIndex, word: &str) -> Vec<String> {
    let head: Vec<String> = index
        .distribution(word)
        .iter()
        .take(3)
        .map(|g| g.gloss.clone())
        .collect();
    if head.is_empty() {
        vec![UNKNOWN_GLOSS.to_string()]
    } else {
        head
    }
}

pub async fn gloss_word(
    index: &CorpusIndex,
    gateway: &Gateway,
    entry: &IgtEntry,
    pos: usize,
    store: Option<&InstructionStore>,
    config: &PromptConfig,
) -> Result<WordResult, PipelineError> {
    let word = entry
        .transcription
        .get(pos)
        .ok_or(ContractError::PositionOutOfRange {
            pos,
            len: entry.transcription.len(),
        })?;
    let injected = store.and_then(|s| select_instructions(index, s, word));
    let bundle = build_gloss_prompt(index, entry, pos, injected.as_ref(), config)?;

    let first = gateway
        .complete(&ChatRequest::glossing(&bundle.text))
        .await?;
    let prompt_hash = first.prompt_hash.clone();
    let err = match parse_llm_response(&first.text, word) {
        Ok(kbest) => {
            warn_mismatch(&kbest);
            return Ok(WordResult {
                bundle,
                outcome: WordOutcome::Glossed { kbest, prompt_hash },
            });
        }
        Err(e) => e,
    };
    tracing::debug!("unreadable answer for {word}: {err}; reprompting");
    let retry_prompt = format!("{}\n{}\n", bundle.text, format_reminder(word));
    let second = gateway
        .complete(&ChatRequest::glossing(retry_prompt))
        .await?;
    match parse_llm_response(&second.text, word) {
        Ok(kbest) => {
            warn_mismatch(&kbest);
            Ok(WordResult {
                bundle,
                outcome: WordOutcome::Glossed { kbest, prompt_hash },
            })
        }
        Err(_) => Ok(WordResult {
            outcome: WordOutcome::Fallback {
                gloss: retrieval_gloss(index, word).to_string(),
                raw_responses: vec![first.text, second.text],
                prompt_hash,
            },
            bundle,
        }),
    }
}

fn warn_mismatch(kbest: &KBestGlosses) {
    if let Some(other) = &kbest.word_mismatch {
        tracing::warn!(
            "model answered for {other:?} while glossing {:?}",
            kbest.word
        );
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: RunMode,
    pub corpus_ref: String,
    /// Only the first `limit` entries are glossed.
    pub limit: Option<usize>,
    pub prompt: PromptConfig,
    /// Number of tokens glossed at once; the gateway applies its own cap.
    pub concurrency: usize,
    /// JSON-lines file extended as tokens finish, and read back on resume.
    pub checkpoint: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(mode: RunMode, corpus_ref: impl Into<String>) -> Self {
        RunOptions {
            mode,
            corpus_ref: corpus_ref.into(),
            limit: None,
            prompt: PromptConfig::default(),
            concurrency: 8,
            checkpoint: None,
        }
    }
}

fn record_for(entry_id: usize, pos: usize, word: &str, result: WordResult) -> RunLine {
    let injected_pair = result.bundle.injected_pair.clone();
    match result.outcome {
        WordOutcome::Glossed { kbest, prompt_hash } => RunLine::Word(WordRecord {
            entry: entry_id,
            pos,
            word: word.to_string(),
            glosses: kbest.glosses,
            prompt_hash: Some(prompt_hash),
            injected_pair,
        }),
        WordOutcome::Fallback {
            gloss, prompt_hash, ..
        } => RunLine::Failure(WordFailure {
            entry: entry_id,
            pos,
            word: word.to_string(),
            kind: FailureKind::MalformedResponse,
            fallback: gloss,
            prompt_hash: Some(prompt_hash),
        }),
    }
}

struct Checkpoint {
    path: PathBuf,
    out: Mutex<BufWriter<File>>,
}

impl Checkpoint {
    fn open(
        path: &Path,
        header: &RunHeader,
    ) -> Result<(Checkpoint, Option<GlossRun>), PipelineError> {
        let err = |message: String| PipelineError::Checkpoint {
            path: path.to_path_buf(),
            message,
        };
        let previous = match std::fs::read_to_string(path) {
            Ok(text) if !text.trim().is_empty() => {
                let run = GlossRun::from_jsonl(&text).map_err(|e| err(e.to_string()))?;
                if run.header != *header {
                    return Err(err("existing file belongs to a different run".into()));
                }
                Some(run)
            }
            Ok(_) => None,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(err(e.to_string())),
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| err(e.to_string()))?;
        let mut out = BufWriter::new(file);
        if previous.is_none() {
            out.write_all(line_json(&RunLine::Header(header.clone())).as_bytes())
                .map_err(|e| err(e.to_string()))?;
        }
        Ok((
            Checkpoint {
                path: path.to_path_buf(),
                out: Mutex::new(out),
            },
            previous,
        ))
    }

    fn append(&self, line: &RunLine) -> Result<(), PipelineError> {
        let mut out = self.out.lock().unwrap();
        out.write_all(line_json(line).as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| PipelineError::Checkpoint {
                path: self.path.clone(),
                message: e.to_string(),
            })
    }
}

/// Glosses every token of the leading entries of `corpus`.
///
/// Retrieval mode never touches the gateway. Model modes require one and
/// stop at the first budget or transport error; tokens finished before that
/// remain in the checkpoint so a rerun picks up where this one stopped.
pub async fn gloss_corpus(
    index: &CorpusIndex,
    gateway: Option<&Gateway>,
    corpus: &[IgtEntry],
    store: Option<&InstructionStore>,
    options: &RunOptions,
) -> Result<GlossRun, PipelineError> {
    let count = options.limit.map_or(corpus.len(), |l| l.min(corpus.len()));
    let entries = &corpus[..count];
    let header = RunHeader {
        corpus_ref: options.corpus_ref.clone(),
        mode: options.mode,
        snapshot_id: index.corpus_id.clone(),
        template_version: TEMPLATE_VERSION.to_string(),
        entry_count: count,
    };

    if options.mode == RunMode::Retrieval {
        let mut run = GlossRun::new(header);
        for (i, entry) in entries.iter().enumerate() {
            for (pos, word) in entry.transcription.iter().enumerate() {
                run.insert_word(WordRecord {
                    entry: i,
                    pos,
                    word: word.clone(),
                    glosses: retrieval_kbest(index, word),
                    prompt_hash: None,
                    injected_pair: None,
                });
            }
        }
        if let Some(path) = &options.checkpoint {
            std::fs::write(path, run.to_jsonl()).map_err(|e| PipelineError::Checkpoint {
                path: path.clone(),
                message: e.to_string(),
            })?;
        }
        return Ok(run);
    }

    let gateway = gateway.ok_or(PipelineError::NoGateway(options.mode))?;
    let store = if options.mode == RunMode::LlmInstructions {
        store
    } else {
        None
    };
    let (checkpoint, previous) = match &options.checkpoint {
        Some(path) => {
            let (c, p) = Checkpoint::open(path, &header)?;
            (Some(c), p)
        }
        None => (None, None),
    };
    let mut run = previous.unwrap_or_else(|| GlossRun::new(header));

    let todo: Vec<(usize, usize)> = entries
        .iter()
        .enumerate()
        .flat_map(|(i, e)| (0..e.transcription.len()).map(move |p| (i, p)))
        .filter(|&(i, p)| !run.contains(i, p))
        .collect();

    let checkpoint = checkpoint.as_ref();
    let mut results = stream::iter(todo)
        .map(|(i, p)| async move {
            let entry = &entries[i];
            let result = gloss_word(index, gateway, entry, p, store, &options.prompt).await?;
            let line = record_for(i, p, &entry.transcription[p], result);
            if let Some(c) = checkpoint {
                c.append(&line)?;
            }
            Ok::<RunLine, PipelineError>(line)
        })
        .buffer_unordered(options.concurrency.max(1));

    let mut first_error = None;
    while let Some(r) = results.next().await {
        match r {
            Ok(RunLine::Word(w)) => run.insert_word(w),
            Ok(RunLine::Failure(f)) => run.insert_failure(f),
            Ok(RunLine::Header(_)) => {}
            Err(e) => {
                first_error = Some(e);
                break;
            }
        }
    }
    drop(results);
    if let Some(e) = first_error {
        return Err(e);
    }
    if let Some(path) = &options.checkpoint {
        std::fs::write(path, run.to_jsonl()).map_err(|e| PipelineError::Checkpoint {
            path: path.clone(),
            message: e.to_string(),
        })?;
    }
    Ok(run)
}
