//! Confusable tag pairs and the material used to write disambiguation
//! guidelines for them.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::error::ContractError;
use crate::eval::{ConfusionMatrix, SignaturePair};
use crate::gloss::signature_of;
use crate::index::CorpusIndex;
use crate::language::language_name;
use crate::template::instruction_template;

pub const DEFAULT_PAIR_THRESHOLD: usize = 5;
pub const DEFAULT_MAX_INSTANCES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TagPair {
    pub a: String,
    pub b: String,
    pub dev_confusion_count: usize,
}

impl TagPair {
    pub fn new(x: &str, y: &str, dev_confusion_count: usize) -> Self {
        let key = SignaturePair::new(x, y);
        TagPair {
            a: key.a,
            b: key.b,
            dev_confusion_count,
        }
    }

    pub fn key(&self) -> SignaturePair {
        SignaturePair::new(&self.a, &self.b)
    }

    pub fn contains(&self, signature: &str) -> bool {
        self.a == signature || self.b == signature
    }

    /// File-system safe name, e.g. `PFV.CVB__PST.UNW`.
    pub fn slug(&self) -> String {
        let clean = |s: &str| -> String {
            let s: String = s
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                        c
                    } else {
                        '_'
                    }
                })
                .collect();
            if s.is_empty() {
                "EMPTY".to_string()
            } else {
                s
            }
        };
        alloc::format!("{}__{}", clean(&self.a), clean(&self.b))
    }
}

/// Pairs confused strictly more than `threshold` times, most confused first.
pub fn mine_confusable_pairs(matrix: &ConfusionMatrix, threshold: usize) -> Vec<TagPair> {
    matrix
        .ranked()
        .into_iter()
        .filter(|(_, c)| *c > threshold)
        .map(|(p, c)| TagPair::new(&p.a, &p.b, c))
        .collect()
}

/// A surface token attested in training with both tags of a pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastiveInstance {
    pub surface: String,
    pub entry_a: usize,
    pub pos_a: usize,
    pub entry_b: usize,
    pub pos_b: usize,
    pub count_a: usize,
    pub count_b: usize,
}

impl ContrastiveInstance {
    /// Checks both witnesses against the index they were drawn from.
    pub fn verify(&self, index: &CorpusIndex, pair: &TagPair) -> bool {
        let check = |entry: usize, pos: usize, sig: &str| {
            index.entry(entry).is_some_and(|e| {
                e.transcription.get(pos) == Some(&self.surface)
                    && e.gloss_line
                        .get(pos)
                        .is_some_and(|g| signature_of(g) == sig)
            })
        };
        check(self.entry_a, self.pos_a, &pair.a) && check(self.entry_b, self.pos_b, &pair.b)
    }
}

fn first_witness(
    index: &CorpusIndex,
    token: &str,
    signature: &str,
    avoid: Option<usize>,
) -> Option<(usize, usize)> {
    let occurrences = index.exact.get(token)?;
    let mut fallback = None;
    for occ in occurrences {
        let entry = &index.entries[occ.entry];
        for &pos in &occ.positions {
            if signature_of(&entry.gloss_line[pos]) == signature {
                if avoid != Some(occ.entry) {
                    return Some((occ.entry, pos));
                }
                fallback.get_or_insert((occ.entry, pos));
            }
        }
    }
    fallback
}

/// One instance per surface token whose training glosses carry both
/// signatures, ordered by the rarer side's count (descending), then token.
pub fn contrastive_instances(
    index: &CorpusIndex,
    pair: &TagPair,
    max_instances: usize,
) -> Vec<ContrastiveInstance> {
    let mut eligible: Vec<(&str, usize, usize)> = Vec::new();
    for (token, dist) in &index.distributions {
        let (mut ca, mut cb) = (0, 0);
        for g in dist {
            let sig = signature_of(&g.gloss);
            if sig == pair.a {
                ca += g.count;
            } else if sig == pair.b {
                cb += g.count;
            }
        }
        if ca > 0 && cb > 0 {
            eligible.push((token, ca, cb));
        }
    }
    eligible.sort_by_key(|x| Reverse(x.1.min(x.2)));

    let mut out = Vec::new();
    for (token, ca, cb) in eligible {
        if out.len() >= max_instances {
            break;
        }
        let Some((entry_a, pos_a)) = first_witness(index, token, &pair.a, None) else {
            continue;
        };
        let Some((entry_b, pos_b)) = first_witness(index, token, &pair.b, Some(entry_a)) else {
            continue;
        };
        out.push(ContrastiveInstance {
            surface: token.to_string(),
            entry_a,
            pos_a,
            entry_b,
            pos_b,
            count_a: ca,
            count_b: cb,
        });
    }
    out
}

/// The guideline-elicitation prompt: numbered contrastive blocks followed by
/// the fixed bad-rule/improved-rule exemplars.
pub fn build_instruction_prompt(
    index: &CorpusIndex,
    pair: &TagPair,
    instances: &[ContrastiveInstance],
    language_code: &str,
) -> Result<String, ContractError> {
    if instances.is_empty() {
        return Err(ContractError::NoInstances);
    }
    let t = instruction_template();
    let language = language_name(language_code);
    let mut parts: Vec<String> = Vec::new();
    parts.push(t.render(
        "intro",
        &[
            ("tag_a", &pair.a),
            ("tag_b", &pair.b),
            ("language", language),
        ],
    ));
    for (n, inst) in instances.iter().enumerate() {
        let number = n.to_string();
        parts.push(t.render(
            "instance_header",
            &[("number", &number), ("word", &inst.surface)],
        ));
        for id in [inst.entry_a, inst.entry_b] {
            let e = index.entry(id).ok_or(ContractError::NoInstances)?;
            parts.push(t.render(
                "example",
                &[
                    ("sentence", &e.sentence()),
                    ("gloss", &e.gloss_text()),
                    ("translation", &e.translation),
                ],
            ));
        }
    }
    parts.push(t.render(
        "directive",
        &[
            ("tag_a", &pair.a),
            ("tag_b", &pair.b),
            ("language", language),
        ],
    ));
    let mut text = parts.join("\n\n");
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredInstruction {
    pub pair: TagPair,
    pub text: String,
}

/// In-memory instruction lookup keyed by normalized signature pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstructionStore {
    entries: BTreeMap<SignaturePair, StoredInstruction>,
}

impl InstructionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pair: TagPair, text: impl Into<String>) {
        self.entries.insert(
            pair.key(),
            StoredInstruction {
                pair,
                text: text.into(),
            },
        );
    }

    pub fn get(&self, x: &str, y: &str) -> Option<&StoredInstruction> {
        self.entries.get(&SignaturePair::new(x, y))
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredInstruction> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::igt::{IgtEntry, Split};
    use crate::index::build_index;
    use alloc::vec;

    fn matrix(rows: &[(&str, &str, usize)]) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::default();
        for (a, b, c) in rows {
            m.counts.insert(SignaturePair::new(a, b), *c);
            m.token_errors += c;
        }
        m
    }

    #[test]
    fn mining_uses_strict_threshold() {
        let m = matrix(&[
            ("PST.UNW", "PFV.CVB", 107),
            ("X", "Y", 3),
            ("P", "Q", 5),
            ("R", "S", 6),
        ]);
        let pairs = mine_confusable_pairs(&m, 5);
        assert_eq!(
            pairs,
            vec![
                TagPair::new("PFV.CVB", "PST.UNW", 107),
                TagPair::new("R", "S", 6)
            ]
        );
        assert!(pairs.iter().all(|p| p.a < p.b));
        assert!(mine_confusable_pairs(&ConfusionMatrix::default(), 5).is_empty());
    }

    fn e(t: &str, g: &str, l: &str) -> IgtEntry {
        IgtEntry::from_lines(t, g, l, "ddo", Split::Train)
    }

    #[test]
    fn instances_need_both_tags() {
        let idx = build_index(&[
            e("iħun x", "begin-PFV.CVB X", "a"),
            e("iħun", "begin-PST.UNW", "b"),
            e("oqno", "become-PST.UNW", "c"),
        ]);
        let pair = TagPair::new("PST.UNW", "PFV.CVB", 107);
        let inst = contrastive_instances(&idx, &pair, 32);
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].surface, "iħun");
        assert_eq!((inst[0].entry_a, inst[0].entry_b), (0, 1));
        assert!(inst[0].verify(&idx, &pair));
        let none = TagPair::new("A", "B", 9);
        assert!(contrastive_instances(&idx, &none, 32).is_empty());
    }

    #[test]
    fn one_instance_prompt() {
        let idx = build_index(&[
            e("iħun", "begin-PFV.CVB", "a"),
            e("iħun", "begin-PST.UNW", "b"),
        ]);
        let pair = TagPair::new("PFV.CVB", "PST.UNW", 107);
        let inst = contrastive_instances(&idx, &pair, 32);
        let text = build_instruction_prompt(&idx, &pair, &inst, "ddo").unwrap();
        assert!(text.starts_with(
            "Here are some examples which highlight the differences between two tags, which are represented here as PFV.CVB and PST.UNW, in Tsez."
        ));
        assert!(text.contains("\n\n0: Examples of iħun with both tags:\n\nSentence: iħun\nGloss: begin-PFV.CVB\nTranslation: a\n\nSentence: iħun\nGloss: begin-PST.UNW\nTranslation: b\n\nState some rules"));
        assert!(!text.contains("1: Examples"));
        assert!(text.contains("Do not appeal only to semantics"));
        assert!(text.ends_with("State three to five rules, using this format.\n"));
        assert_eq!(
            text,
            build_instruction_prompt(&idx, &pair, &inst, "ddo").unwrap()
        );
        assert_eq!(
            build_instruction_prompt(&idx, &pair, &[], "ddo"),
            Err(ContractError::NoInstances)
        );
    }

    #[test]
    fn slug_is_path_safe() {
        assert_eq!(
            TagPair::new("PST.UNW", "PFV.CVB", 1).slug(),
            "PFV.CVB__PST.UNW"
        );
        assert_eq!(TagPair::new("", "A/B", 1).slug(), "EMPTY__A_B");
    }
}
