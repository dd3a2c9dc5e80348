//! Assembly of the per-word glossing prompt.
//!
//! Section order is fixed: task statement with the bracketed sentence,
//! candidate gloss and translation; the Leipzig conventions paragraph with
//! the JSON answer skeleton; injected guidelines (if any); the token's tag
//! distribution and features; exact and approximate example sentences; and
//! one reverse-lookup line per translation word.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ContractError;
use crate::gloss::signature_of;
use crate::igt::IgtEntry;
use crate::index::{
    translation_tokens, CorpusIndex, Example, DEFAULT_APPROX_K, DEFAULT_EXACT_K, DEFAULT_MIN_LCS,
    DEFAULT_REVERSE_K,
};
use crate::instructions::{InstructionStore, TagPair};
use crate::language::language_name;
use crate::retrieval::{context_candidate, ContextCandidate};
use crate::template::{gloss_template, TEMPLATE_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub exact_k: usize,
    pub approximate_k: usize,
    pub min_lcs: usize,
    pub reverse_k: usize,
    pub max_reverse_lines: usize,
    pub max_distribution: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            exact_k: DEFAULT_EXACT_K,
            approximate_k: DEFAULT_APPROX_K,
            min_lcs: DEFAULT_MIN_LCS,
            reverse_k: DEFAULT_REVERSE_K,
            max_reverse_lines: 12,
            max_distribution: 5,
        }
    }
}

/// Guidelines selected for injection into one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedInstructions {
    pub pair: TagPair,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceExample {
    pub entry: usize,
    pub matched: String,
    pub sentence: String,
    pub gloss: String,
    pub translation: String,
}

impl From<&Example<'_>> for EvidenceExample {
    fn from(ex: &Example<'_>) -> Self {
        EvidenceExample {
            entry: ex.id,
            matched: ex.matched.to_string(),
            sentence: ex.entry.sentence(),
            gloss: ex.entry.gloss_text(),
            translation: ex.entry.translation.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReverseLine {
    pub metaword: String,
    pub items: Vec<(String, String)>,
}

/// What was retrieved for a prompt, for audit and display.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub candidate: ContextCandidate,
    pub distribution: Vec<(String, u32)>,
    pub features: Vec<String>,
    pub exact: Vec<EvidenceExample>,
    pub approximate: Vec<EvidenceExample>,
    pub reverse: Vec<ReverseLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub text: String,
    pub target_word: String,
    pub target_pos: usize,
    pub injected_pair: Option<TagPair>,
    pub template_version: String,
    pub evidence: Evidence,
}

/// Evidence for a token independent of any sentence context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEvidence {
    pub word: String,
    pub distribution: Vec<(String, u32)>,
    pub features: Vec<String>,
    pub exact: Vec<EvidenceExample>,
    pub approximate: Vec<EvidenceExample>,
}

pub fn word_evidence(index: &CorpusIndex, word: &str, config: &PromptConfig) -> WordEvidence {
    let mut distribution = index.gloss_distribution(word);
    distribution.truncate(config.max_distribution);
    let mut seen = BTreeSet::new();
    let features = distribution
        .iter()
        .map(|(g, _)| signature_of(g))
        .filter(|s| !s.is_empty() && seen.insert(s.clone()))
        .collect();
    let exact = index
        .exact_examples(word, config.exact_k)
        .iter()
        .map(EvidenceExample::from)
        .collect();
    let approximate = index
        .approximate_examples(word, config.approximate_k, config.min_lcs)
        .iter()
        .map(EvidenceExample::from)
        .collect();
    WordEvidence {
        word: word.to_string(),
        distribution,
        features,
        exact,
        approximate,
    }
}

pub fn build_gloss_prompt(
    index: &CorpusIndex,
    entry: &IgtEntry,
    target_pos: usize,
    instructions: Option<&InjectedInstructions>,
    config: &PromptConfig,
) -> Result<PromptBundle, ContractError> {
    let candidate = context_candidate(index, entry, target_pos)?;
    let word = entry.transcription[target_pos].as_str();
    let t = gloss_template();
    let WordEvidence {
        distribution,
        features,
        exact,
        approximate,
        ..
    } = word_evidence(index, word, config);

    let mut reverse = Vec::new();
    let mut seen = BTreeSet::new();
    for metaword in translation_tokens(&entry.translation) {
        if reverse.len() >= config.max_reverse_lines {
            break;
        }
        if !seen.insert(metaword.clone()) {
            continue;
        }
        let items = index.reverse_lookup(&metaword, config.reverse_k);
        if !items.is_empty() {
            reverse.push(ReverseLine { metaword, items });
        }
    }

    let mut sections: Vec<String> = Vec::new();
    sections.push(t.render(
        "task",
        &[
            ("language", language_name(&entry.language)),
            ("word", word),
            ("sentence", &candidate.sentence),
            ("candidate", &candidate.gloss),
            ("translation", &entry.translation),
        ],
    ));
    sections.push(t.render("conventions", &[("word", word)]));
    if let Some(inj) = instructions {
        sections.push(t.render(
            "instructions",
            &[
                ("tag_a", &inj.pair.a),
                ("tag_b", &inj.pair.b),
                ("instructions", inj.text.trim_end()),
            ],
        ));
    }
    if !distribution.is_empty() {
        let shown: Vec<String> = distribution
            .iter()
            .map(|(g, p)| format!("{g} ({p}%)"))
            .collect();
        sections.push(t.render(
            "distribution",
            &[("word", word), ("distribution", &shown.join(", "))],
        ));
        if !features.is_empty() {
            sections.push(t.render("features", &[("features", &features.join(", "))]));
        }
    }
    if !exact.is_empty() || !approximate.is_empty() {
        sections.push(t.render("examples_intro", &[("word", word)]));
    }
    for (header, examples) in [
        ("exact_header", &exact),
        ("approximate_header", &approximate),
    ] {
        if examples.is_empty() {
            continue;
        }
        let mut block = t.render(header, &[]);
        for ex in examples.iter() {
            block.push('\n');
            block.push_str(&t.render(
                "example",
                &[
                    ("sentence", &ex.sentence),
                    ("gloss", &ex.gloss),
                    ("translation", &ex.translation),
                ],
            ));
        }
        sections.push(block);
    }
    if !reverse.is_empty() {
        let lines: Vec<String> = reverse
            .iter()
            .map(|line| {
                let items: Vec<String> = line
                    .items
                    .iter()
                    .map(|(s, g)| format!("{s} ({g})"))
                    .collect();
                t.render(
                    "reverse_line",
                    &[("metaword", &line.metaword), ("items", &items.join(", "))],
                )
            })
            .collect();
        sections.push(lines.join("\n"));
    }

    let mut text = sections.join("\n\n");
    text.push('\n');
    Ok(PromptBundle {
        text,
        target_word: word.to_string(),
        target_pos,
        injected_pair: instructions.map(|i| i.pair.clone()),
        template_version: TEMPLATE_VERSION.to_string(),
        evidence: Evidence {
            candidate,
            distribution,
            features,
            exact,
            approximate,
            reverse,
        },
    })
}

/// Reminder appended when a model answer could not be parsed.
pub fn format_reminder(word: &str) -> String {
    gloss_template().render("format_reminder", &[("word", word)])
}

/// Picks stored guidelines relevant to `word`.
///
/// A stored pair applies when either of its signatures occurs among the
/// signatures of the word's training glosses. When several apply, the pair
/// most often confused (dev count) with the signature of the word's most
/// frequent gloss wins.
pub fn select_instructions(
    index: &CorpusIndex,
    store: &InstructionStore,
    word: &str,
) -> Option<InjectedInstructions> {
    let dist = index.distribution(word);
    let signatures: BTreeSet<String> = dist
        .iter()
        .map(|g| signature_of(&g.gloss))
        .filter(|s| !s.is_empty())
        .collect();
    if signatures.is_empty() {
        return None;
    }
    let top = dist
        .first()
        .map(|g| signature_of(&g.gloss))
        .unwrap_or_default();
    let applicable: Vec<_> = store
        .iter()
        .filter(|s| signatures.contains(&s.pair.a) || signatures.contains(&s.pair.b))
        .collect();
    let with_top: Vec<_> = applicable
        .iter()
        .copied()
        .filter(|s| !top.is_empty() && s.pair.contains(&top))
        .collect();
    let pool = if with_top.is_empty() {
        applicable
    } else {
        with_top
    };
    let mut best: Option<&crate::instructions::StoredInstruction> = None;
    for s in pool {
        match best {
            Some(b) if b.pair.dev_confusion_count >= s.pair.dev_confusion_count => {}
            _ => best = Some(s),
        }
    }
    best.map(|s| InjectedInstructions {
        pair: s.pair.clone(),
        text: s.text.clone(),
    })
}
