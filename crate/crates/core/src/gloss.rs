//! Leipzig-style word glosses.
//!
//! A word gloss such as `IV.PL-do-PFV.CVB` is a hyphen-separated list of
//! morpheme glosses, each of which is a period-separated list of elements.
//! Elements without any lowercase letter (`PFV`, `III`, `GEN1`) are
//! grammatical; everything else is lexical.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GlossError;

pub const MORPHEME_SEPARATOR: char = '-';
pub const ELEMENT_SEPARATOR: char = '.';

/// Returns `true` if the element is a grammatical label rather than lexical
/// material.
pub fn is_grammatical(element: &str) -> bool {
    !element.chars().any(char::is_lowercase)
}

/// Splits a gloss into its nonempty elements, in order, duplicates kept.
pub fn split_elements(raw: &str) -> impl Iterator<Item = &str> {
    raw.split([MORPHEME_SEPARATOR, ELEMENT_SEPARATOR])
        .filter(|e| !e.is_empty())
}

/// The grammatical skeleton of a gloss, with lexical material removed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TagSignature {
    pub grammatical: Vec<String>,
    pub rendered: String,
}

impl TagSignature {
    pub fn from_raw(raw: &str) -> Self {
        let mut grammatical = Vec::new();
        let mut morphemes = Vec::new();
        for morpheme in raw.split(MORPHEME_SEPARATOR) {
            let kept: Vec<&str> = morpheme
                .split(ELEMENT_SEPARATOR)
                .filter(|e| !e.is_empty() && is_grammatical(e))
                .collect();
            if kept.is_empty() {
                continue;
            }
            grammatical.extend(kept.iter().map(|e| e.to_string()));
            morphemes.push(kept.join("."));
        }
        TagSignature {
            grammatical,
            rendered: morphemes.join("-"),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.grammatical.is_empty()
    }

    pub fn as_str(&self) -> &str {
        &self.rendered
    }
}

impl fmt::Display for TagSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered)
    }
}

/// Renders the tag signature of a raw gloss string.
pub fn signature_of(raw: &str) -> String {
    TagSignature::from_raw(raw).rendered
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordGloss {
    pub raw: String,
    pub morphemes: Vec<String>,
    /// Nonempty elements in order of appearance. Use [`WordGloss::element_set`]
    /// for set semantics.
    pub elements: Vec<String>,
    pub signature: TagSignature,
}

impl WordGloss {
    pub fn parse(raw: &str) -> Result<Self, GlossError> {
        parse_word_gloss(raw)
    }

    pub fn element_set(&self) -> BTreeSet<&str> {
        self.elements.iter().map(String::as_str).collect()
    }
}

impl fmt::Display for WordGloss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

pub fn parse_word_gloss(raw: &str) -> Result<WordGloss, GlossError> {
    if raw.is_empty() {
        return Err(GlossError::Empty);
    }
    if raw.chars().any(char::is_whitespace) {
        return Err(GlossError::Whitespace(raw.to_string()));
    }
    Ok(WordGloss {
        raw: raw.to_string(),
        morphemes: raw.split(MORPHEME_SEPARATOR).map(str::to_string).collect(),
        elements: split_elements(raw).map(str::to_string).collect(),
        signature: TagSignature::from_raw(raw),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn parses_mixed_gloss() {
        let g = parse_word_gloss("IV.PL-do-PFV.CVB").unwrap();
        assert_eq!(g.morphemes, vec!["IV.PL", "do", "PFV.CVB"]);
        let set: Vec<&str> = g.element_set().into_iter().collect();
        assert_eq!(set, vec!["CVB", "IV", "PFV", "PL", "do"]);
        assert_eq!(g.signature.rendered, "IV.PL-PFV.CVB");
        assert_eq!(g.signature.grammatical, vec!["IV", "PL", "PFV", "CVB"]);
    }

    #[test]
    fn lexical_only_has_empty_signature() {
        let g = parse_word_gloss("tongue").unwrap();
        assert_eq!(g.morphemes, vec!["tongue"]);
        assert_eq!(g.elements, vec!["tongue"]);
        assert_eq!(g.signature.rendered, "");
        assert!(g.signature.is_empty());
    }

    #[test]
    fn stem_dropped_from_signature() {
        assert_eq!(signature_of("end-PFV.CVB"), "PFV.CVB");
        assert_eq!(signature_of("III-take.away-PFV.CVB"), "III-PFV.CVB");
        assert_eq!(signature_of("be.NPRS-PST.UNW"), "NPRS-PST.UNW");
    }

    #[test]
    fn digits_and_mixed_case() {
        assert!(is_grammatical("GEN1"));
        assert!(is_grammatical("DEM1"));
        assert!(is_grammatical("3"));
        assert!(!is_grammatical("Musa"));
        assert_eq!(signature_of("DEM1.ISG-Musa"), "DEM1.ISG");
    }

    #[test]
    fn whitespace_rejected() {
        assert!(matches!(
            parse_word_gloss("hide PST"),
            Err(GlossError::Whitespace(_))
        ));
        assert_eq!(parse_word_gloss(""), Err(GlossError::Empty));
    }

    #[test]
    fn brackets_are_opaque_lexical() {
        let g = parse_word_gloss("[laugh]-PST").unwrap();
        assert_eq!(g.elements, vec!["[laugh]", "PST"]);
        assert_eq!(g.signature.rendered, "PST");
    }

    #[test]
    fn empty_morphemes_round_trip() {
        let g = parse_word_gloss("a--b.").unwrap();
        assert_eq!(g.morphemes.join("-"), "a--b.");
        assert_eq!(g.elements, vec!["a", "b"]);
    }
}
