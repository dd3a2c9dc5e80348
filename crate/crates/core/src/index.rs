//! Retrieval indices over a training corpus.
//!
//! A [`CorpusIndex`] is built once and never mutated; new data means a new
//! index. It bundles exact token occurrences, per-token gloss distributions,
//! the sorted vocabulary used for approximate (longest common substring)
//! matching, and a reverse index from metalanguage words to object-language
//! tokens whose glosses contain them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gloss::{is_grammatical, split_elements};
use crate::igt::{serialize_entry, IgtEntry};
use crate::lcs::lcs_len_chars;

/// Gloss used for tokens nobody has analysed yet; never indexed.
pub const UNKNOWN_GLOSS: &str = "?";

pub const DEFAULT_EXACT_K: usize = 3;
pub const DEFAULT_APPROX_K: usize = 3;
pub const DEFAULT_MIN_LCS: usize = 4;
pub const DEFAULT_REVERSE_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub entry: usize,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlossCount {
    pub gloss: String,
    pub count: usize,
    /// Exact share of the token's occurrences, in percent.
    pub percent: f64,
}

impl GlossCount {
    /// Share rounded half-up to a whole percent, as shown in prompts.
    pub fn rounded_percent(&self, total: usize) -> u32 {
        rounded_percent(self.count, total)
    }
}

pub fn rounded_percent(count: usize, total: usize) -> u32 {
    if total == 0 {
        return 0;
    }
    ((200 * count + total) / (2 * total)) as u32
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReverseHit {
    pub surface: String,
    /// Most frequent of the token's glosses that matched the metalanguage word.
    pub gloss: String,
    pub frequency: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexOptions {
    /// Seed mixed into every example sample.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub corpus_id: String,
    pub seed: u64,
    /// Aligned entries; entry ids below index into this list.
    pub entries: Vec<IgtEntry>,
    pub exact: BTreeMap<String, Vec<Occurrence>>,
    pub distributions: BTreeMap<String, Vec<GlossCount>>,
    pub vocabulary: Vec<String>,
    pub reverse: BTreeMap<String, Vec<ReverseHit>>,
    pub skipped_misaligned: usize,
}

/// One retrieved example sentence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example<'a> {
    pub id: usize,
    pub entry: &'a IgtEntry,
    pub matched: &'a str,
}

/// Lowercases a free translation and strips surrounding punctuation from
/// each whitespace token.
pub fn translation_tokens(translation: &str) -> Vec<String> {
    const PUNCT: &[char] = &[
        '.', ',', ';', ':', '!', '?', '"', '\'', '(', ')', '¿', '¡', '“', '”', '‘', '’', '[', ']',
    ];
    translation
        .split_whitespace()
        .map(|t| t.trim_matches(PUNCT).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Whether `metaword` (already lowercased) occurs inside a lexical element
/// of `gloss`.
pub fn gloss_mentions(gloss: &str, metaword: &str) -> bool {
    split_elements(gloss)
        .filter(|e| !is_grammatical(e))
        .any(|e| e.to_lowercase().contains(metaword))
}

pub fn corpus_id(corpus: &[IgtEntry]) -> String {
    let mut hasher = Sha256::new();
    for entry in corpus {
        hasher.update(entry.language.as_bytes());
        hasher.update([0]);
        hasher.update(alloc::format!("{}", entry.split).as_bytes());
        hasher.update([0]);
        hasher.update(serialize_entry(entry).as_bytes());
    }
    hex(&hasher.finalize())
}

pub fn hex(bytes: &[u8]) -> String {
    use core::fmt::Write;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Lowercase hex SHA-256 of `text`; used for prompt identity.
pub fn sha256_hex(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

pub fn build_index(corpus: &[IgtEntry]) -> CorpusIndex {
    build_index_with(corpus, &IndexOptions::default())
}

pub fn build_index_with(corpus: &[IgtEntry], options: &IndexOptions) -> CorpusIndex {
    let entries: Vec<IgtEntry> = corpus.iter().filter(|e| e.aligned).cloned().collect();
    let skipped_misaligned = corpus.len() - entries.len();

    let mut exact: BTreeMap<String, Vec<Occurrence>> = BTreeMap::new();
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    // metaword -> surface -> gloss -> credits
    let mut credits: BTreeMap<String, BTreeMap<&str, BTreeMap<&str, usize>>> = BTreeMap::new();

    for (id, entry) in entries.iter().enumerate() {
        let mut positions: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (pos, token) in entry.transcription.iter().enumerate() {
            positions.entry(token).or_default().push(pos);
            let gloss = entry.gloss_line[pos].as_str();
            if gloss != UNKNOWN_GLOSS {
                *counts.entry(token).or_default().entry(gloss).or_default() += 1;
            }
        }
        for (token, positions) in positions {
            exact
                .entry(token.to_string())
                .or_default()
                .push(Occurrence {
                    entry: id,
                    positions,
                });
        }

        let words: BTreeSet<String> = translation_tokens(&entry.translation).into_iter().collect();
        for word in words {
            for (pos, gloss) in entry.gloss_line.iter().enumerate() {
                if gloss == UNKNOWN_GLOSS || !gloss_mentions(gloss, &word) {
                    continue;
                }
                *credits
                    .entry(word.clone())
                    .or_default()
                    .entry(entry.transcription[pos].as_str())
                    .or_default()
                    .entry(gloss.as_str())
                    .or_default() += 1;
            }
        }
    }

    let distributions = counts
        .into_iter()
        .map(|(token, glosses)| {
            let total: usize = glosses.values().sum();
            let mut list: Vec<GlossCount> = glosses
                .into_iter()
                .map(|(gloss, count)| GlossCount {
                    gloss: gloss.to_string(),
                    count,
                    percent: count as f64 * 100.0 / total as f64,
                })
                .collect();
            // BTreeMap iteration is already lexicographic; the sort is stable.
            list.sort_by_key(|a| Reverse(a.count));
            (token.to_string(), list)
        })
        .collect();

    let reverse = credits
        .into_iter()
        .map(|(word, surfaces)| {
            let mut hits: Vec<ReverseHit> = surfaces
                .into_iter()
                .map(|(surface, glosses)| {
                    let frequency = glosses.values().sum();
                    let gloss = argmax_lexicographic(glosses.iter().map(|(g, c)| (*g, *c)));
                    ReverseHit {
                        surface: surface.to_string(),
                        gloss: gloss.to_string(),
                        frequency,
                    }
                })
                .collect();
            hits.sort_by_key(|a| Reverse(a.frequency));
            (word, hits)
        })
        .collect();

    let vocabulary = exact.keys().cloned().collect();

    CorpusIndex {
        corpus_id: corpus_id(corpus),
        seed: options.seed,
        entries,
        exact,
        distributions,
        vocabulary,
        reverse,
        skipped_misaligned,
    }
}

/// Highest count, then lexicographically smallest key. Input must be in
/// ascending key order.
fn argmax_lexicographic<'a>(items: impl Iterator<Item = (&'a str, usize)>) -> &'a str {
    let mut best: Option<(&str, usize)> = None;
    for (key, count) in items {
        match best {
            Some((_, c)) if c >= count => {}
            _ => best = Some((key, count)),
        }
    }
    best.map(|b| b.0).unwrap_or("")
}

impl CorpusIndex {
    pub fn empty() -> Self {
        build_index(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: usize) -> Option<&IgtEntry> {
        self.entries.get(id)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.exact.contains_key(word)
    }

    /// Total occurrences of `word` across the corpus.
    pub fn frequency(&self, word: &str) -> usize {
        self.exact
            .get(word)
            .map(|occ| occ.iter().map(|o| o.positions.len()).sum())
            .unwrap_or(0)
    }

    pub fn distribution(&self, word: &str) -> &[GlossCount] {
        self.distributions
            .get(word)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// The retrieval gloss: highest count, ties to the lexicographically
    /// smallest gloss.
    pub fn most_frequent_gloss(&self, word: &str) -> Option<&str> {
        self.distribution(word).first().map(|g| g.gloss.as_str())
    }

    /// `(gloss, rounded percentage)` pairs, most frequent first.
    pub fn gloss_distribution(&self, word: &str) -> Vec<(String, u32)> {
        let dist = self.distribution(word);
        let total: usize = dist.iter().map(|g| g.count).sum();
        dist.iter()
            .map(|g| (g.gloss.clone(), g.rounded_percent(total)))
            .collect()
    }

    /// Up to `k` distinct entries containing `word` as a full token.
    pub fn exact_examples(&self, word: &str, k: usize) -> Vec<Example<'_>> {
        let Some((key, occurrences)) = self.exact.get_key_value(word) else {
            return Vec::new();
        };
        let pool: Vec<usize> = occurrences.iter().map(|o| o.entry).collect();
        self.sample("exact", word, pool.len(), k)
            .into_iter()
            .map(|i| Example {
                id: pool[i],
                entry: &self.entries[pool[i]],
                matched: key.as_str(),
            })
            .collect()
    }

    /// Vocabulary tokens other than `word` sharing the longest common
    /// substring with it, provided that substring has at least `min_lcs`
    /// characters. Returned with the LCS length, most frequent first.
    pub fn approximate_tokens(&self, word: &str, min_lcs: usize) -> (usize, Vec<&str>) {
        let target: Vec<char> = word.chars().collect();
        if target.len() < min_lcs.max(1) {
            return (0, Vec::new());
        }
        let mut best = 0;
        let mut tier: Vec<&str> = Vec::new();
        let mut buf: Vec<char> = Vec::new();
        for token in &self.vocabulary {
            if token == word {
                continue;
            }
            buf.clear();
            buf.extend(token.chars());
            let len = lcs_len_chars(&target, &buf);
            if len < min_lcs.max(1) || len < best {
                continue;
            }
            if len > best {
                best = len;
                tier.clear();
            }
            tier.push(token);
        }
        // vocabulary is sorted, so the stable sort leaves ties lexicographic
        tier.sort_by_key(|t| core::cmp::Reverse(self.frequency(t)));
        (best, tier)
    }

    /// Up to `k` example entries for the best approximate matches of `word`.
    ///
    /// All entries containing a maximal-LCS token form one pool, ordered by
    /// token preference (frequency, then lexicographic) and entry id; the
    /// sample is drawn from that pool and keeps pool order.
    pub fn approximate_examples(&self, word: &str, k: usize, min_lcs: usize) -> Vec<Example<'_>> {
        let (_, tokens) = self.approximate_tokens(word, min_lcs);
        let mut seen = BTreeSet::new();
        let mut pool: Vec<(usize, &str)> = Vec::new();
        for token in tokens {
            let (key, occurrences) = self.exact.get_key_value(token).expect("vocabulary token");
            for occ in occurrences {
                if seen.insert(occ.entry) {
                    pool.push((occ.entry, key.as_str()));
                }
            }
        }
        self.sample("approximate", word, pool.len(), k)
            .into_iter()
            .map(|i| Example {
                id: pool[i].0,
                entry: &self.entries[pool[i].0],
                matched: pool[i].1,
            })
            .collect()
    }

    /// Top `k` object-language tokens whose glosses contain `metaword`.
    pub fn reverse_lookup(&self, metaword: &str, k: usize) -> Vec<(String, String)> {
        self.reverse_hits(metaword)
            .iter()
            .take(k)
            .map(|h| (h.surface.clone(), h.gloss.clone()))
            .collect()
    }

    pub fn reverse_hits(&self, metaword: &str) -> &[ReverseHit] {
        self.reverse
            .get(&metaword.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Deterministic sample of `k` indices out of `0..n`, returned ascending.
    fn sample(&self, purpose: &str, word: &str, n: usize, k: usize) -> Vec<usize> {
        if k >= n {
            return (0..n).collect();
        }
        let mut rng = self.rng(purpose, word);
        let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
        picked.sort_unstable();
        picked
    }

    fn rng(&self, purpose: &str, word: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(self.corpus_id.as_bytes());
        hasher.update([0]);
        hasher.update(purpose.as_bytes());
        hasher.update([0]);
        hasher.update(word.as_bytes());
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }

    /// Same corpus, different sampling seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
