//! Scoring: word and morpheme accuracy, the Jaccard k-best oracle, and
//! tag-signature confusion counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::gloss::{signature_of, split_elements};
use crate::igt::IgtEntry;
use crate::index::UNKNOWN_GLOSS;

/// Denominator used when scoring elements positionally within a token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MorphemeDenominator {
    /// max(|predicted elements|, |gold elements|)
    #[default]
    MaxLength,
    /// |gold elements|
    GoldLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryScore {
    pub entry: usize,
    pub tokens: usize,
    pub correct_tokens: usize,
    pub morphemes: usize,
    pub correct_morphemes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub word_accuracy: f64,
    pub morpheme_accuracy: f64,
    pub token_count: usize,
    pub correct_tokens: usize,
    pub morpheme_count: usize,
    pub correct_morphemes: usize,
    pub denominator: MorphemeDenominator,
    pub per_entry: Vec<EntryScore>,
}

fn token_correct(pred: &str, gold: &str) -> bool {
    let (pred, gold) = (pred.trim(), gold.trim());
    if pred == UNKNOWN_GLOSS {
        return gold == UNKNOWN_GLOSS;
    }
    pred == gold
}

/// (positional element matches, denominator) for one token.
pub fn element_matches(pred: &str, gold: &str, denominator: MorphemeDenominator) -> (usize, usize) {
    let p: Vec<&str> = split_elements(pred.trim()).collect();
    let g: Vec<&str> = split_elements(gold.trim()).collect();
    let matches = p.iter().zip(&g).filter(|(a, b)| a == b).count();
    let denom = match denominator {
        MorphemeDenominator::MaxLength => p.len().max(g.len()),
        MorphemeDenominator::GoldLength => g.len(),
    };
    (matches, denom)
}

fn check_lengths(pred: &[Vec<String>], gold: &[IgtEntry]) -> Result<(), EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::CorpusSizeMismatch {
            predicted: pred.len(),
            gold: gold.len(),
        });
    }
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.gloss_line.len() {
            return Err(EvalError::LengthMismatch {
                entry: i,
                predicted: p.len(),
                gold: g.gloss_line.len(),
            });
        }
    }
    Ok(())
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 * 100.0 / den as f64
    }
}

/// Scores per-sentence predictions against gold entries.
pub fn evaluate(
    pred: &[Vec<String>],
    gold: &[IgtEntry],
    denominator: MorphemeDenominator,
) -> Result<EvalReport, EvalError> {
    check_lengths(pred, gold)?;
    let mut per_entry = Vec::with_capacity(gold.len());
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        let mut score = EntryScore {
            entry: i,
            tokens: g.gloss_line.len(),
            correct_tokens: 0,
            morphemes: 0,
            correct_morphemes: 0,
        };
        for (pg, gg) in p.iter().zip(&g.gloss_line) {
            score.correct_tokens += token_correct(pg, gg) as usize;
            let (m, d) = element_matches(pg, gg, denominator);
            score.correct_morphemes += m;
            score.morphemes += d;
        }
        per_entry.push(score);
    }
    let token_count = per_entry.iter().map(|e| e.tokens).sum();
    let correct_tokens = per_entry.iter().map(|e| e.correct_tokens).sum();
    let morpheme_count = per_entry.iter().map(|e| e.morphemes).sum();
    let correct_morphemes = per_entry.iter().map(|e| e.correct_morphemes).sum();
    Ok(EvalReport {
        word_accuracy: percent(correct_tokens, token_count),
        morpheme_accuracy: percent(correct_morphemes, morpheme_count),
        token_count,
        correct_tokens,
        morpheme_count,
        correct_morphemes,
        denominator,
        per_entry,
    })
}

/// Pads (with `?`) or truncates each prediction to its gold gloss line,
/// for gold files with misaligned entries. Returns how many were adjusted.
pub fn fit_to_gold(mut pred: Vec<Vec<String>>, gold: &[IgtEntry]) -> (Vec<Vec<String>>, usize) {
    let mut adjusted = 0;
    for (p, g) in pred.iter_mut().zip(gold) {
        if p.len() != g.gloss_line.len() {
            adjusted += 1;
            p.resize(g.gloss_line.len(), String::from(UNKNOWN_GLOSS));
        }
    }
    (pred, adjusted)
}

pub fn word_accuracy(pred: &[Vec<String>], gold: &[IgtEntry]) -> Result<f64, EvalError> {
    evaluate(pred, gold, MorphemeDenominator::MaxLength).map(|r| r.word_accuracy)
}

pub fn morpheme_accuracy(
    pred: &[Vec<String>],
    gold: &[IgtEntry],
    denominator: MorphemeDenominator,
) -> Result<f64, EvalError> {
    evaluate(pred, gold, denominator).map(|r| r.morpheme_accuracy)
}

/// Jaccard coefficient between the element sets of two glosses.
pub fn jaccard(pred: &str, gold: &str) -> f64 {
    let a: BTreeSet<&str> = split_elements(pred).collect();
    let b: BTreeSet<&str> = split_elements(gold).collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(&b).count();
    let union = a.union(&b).count();
    inter as f64 / union as f64
}

/// Candidate with the highest Jaccard score against gold; earlier
/// candidates win ties.
pub fn oracle_select<'a, S: AsRef<str>>(candidates: &'a [S], gold: &str) -> Option<&'a str> {
    let mut best: Option<(&str, f64)> = None;
    for c in candidates {
        let score = jaccard(c.as_ref(), gold);
        match best {
            Some((_, s)) if s >= score => {}
            _ => best = Some((c.as_ref(), score)),
        }
    }
    best.map(|b| b.0)
}

/// Unordered signature pair, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignaturePair {
    pub a: String,
    pub b: String,
}

impl SignaturePair {
    pub fn new(x: &str, y: &str) -> Self {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        SignaturePair {
            a: a.into(),
            b: b.into(),
        }
    }

    pub fn contains(&self, signature: &str) -> bool {
        self.a == signature || self.b == signature
    }

    /// Whether either side has `element` among its grammatical elements.
    pub fn involves_element(&self, element: &str) -> bool {
        split_elements(&self.a).any(|e| e == element)
            || split_elements(&self.b).any(|e| e == element)
    }
}

impl core::fmt::Display for SignaturePair {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} / {}", self.a, self.b)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(with = "pair_counts")]
    pub counts: BTreeMap<SignaturePair, usize>,
    pub token_errors: usize,
}

impl ConfusionMatrix {
    pub fn record(&mut self, pred: &str, gold: &str) {
        if token_correct(pred, gold) {
            return;
        }
        self.token_errors += 1;
        let (ps, gs) = (signature_of(pred.trim()), signature_of(gold.trim()));
        if ps != gs {
            *self.counts.entry(SignaturePair::new(&gs, &ps)).or_default() += 1;
        }
    }

    pub fn count(&self, x: &str, y: &str) -> usize {
        self.counts
            .get(&SignaturePair::new(x, y))
            .copied()
            .unwrap_or(0)
    }

    pub fn total_pair_count(&self) -> usize {
        self.counts.values().sum()
    }

    /// Pairs sorted by descending count, then pair order.
    pub fn ranked(&self) -> Vec<(&SignaturePair, usize)> {
        let mut v: Vec<_> = self.counts.iter().map(|(p, c)| (p, *c)).collect();
        v.sort_by_key(|x| Reverse(x.1));
        v
    }

    pub fn top(&self, n: usize) -> Vec<(&SignaturePair, usize)> {
        let mut v = self.ranked();
        v.truncate(n);
        v
    }

    /// Sum over all pairs in which either signature carries `element`
    /// (the "CVB / any" aggregate for `element = "CVB"`).
    pub fn element_aggregate(&self, element: &str) -> usize {
        self.counts
            .iter()
            .filter(|(p, _)| p.involves_element(element))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.token_errors += other.token_errors;
        for (p, c) in &other.counts {
            *self.counts.entry(p.clone()).or_default() += c;
        }
    }
}

pub fn confusion_matrix(
    pred: &[Vec<String>],
    gold: &[IgtEntry],
) -> Result<ConfusionMatrix, EvalError> {
    check_lengths(pred, gold)?;
    let mut m = ConfusionMatrix::default();
    for (p, g) in pred.iter().zip(gold) {
        for (pg, gg) in p.iter().zip(&g.gloss_line) {
            m.record(pg, gg);
        }
    }
    Ok(m)
}

mod pair_counts {
    use super::SignaturePair;
    use alloc::collections::BTreeMap;
    use alloc::vec::Vec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        a: alloc::string::String,
        b: alloc::string::String,
        count: usize,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<SignaturePair, usize>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row> = map
            .iter()
            .map(|(p, c)| Row {
                a: p.a.clone(),
                b: p.b.clone(),
                count: *c,
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<SignaturePair, usize>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| (SignaturePair::new(&r.a, &r.b), r.count))
            .collect())
    }
}
