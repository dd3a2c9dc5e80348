//! Shared-task style IGT corpus files.
//!
//! Entries are blocks of `\<marker> <content>` lines separated by blank
//! lines. Track 1 files carry `\t` (transcription), `\g` (gloss) and `\l`
//! (translation); a `\m` segmentation line may appear and is discarded.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(alloc::format!("unknown split {other:?}")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IgtEntry {
    pub transcription: Vec<String>,
    pub gloss_line: Vec<String>,
    pub translation: String,
    pub language: String,
    pub split: Split,
    /// Set when the gloss line has exactly one gloss per transcription token.
    pub aligned: bool,
}

impl IgtEntry {
    pub fn new(
        transcription: Vec<String>,
        gloss_line: Vec<String>,
        translation: impl Into<String>,
        language: impl Into<String>,
        split: Split,
    ) -> Self {
        let aligned = !gloss_line.is_empty() && gloss_line.len() == transcription.len();
        IgtEntry {
            transcription,
            gloss_line,
            translation: translation.into(),
            language: language.into(),
            split,
            aligned,
        }
    }

    /// Convenience constructor splitting both lines on ASCII whitespace.
    pub fn from_lines(
        transcription: &str,
        gloss: &str,
        translation: &str,
        language: &str,
        split: Split,
    ) -> Self {
        IgtEntry::new(
            tokenize(transcription),
            tokenize(gloss),
            translation.trim_matches(is_ascii_ws),
            language,
            split,
        )
    }

    pub fn is_misaligned(&self) -> bool {
        !self.aligned
    }

    pub fn len(&self) -> usize {
        self.transcription.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcription.is_empty()
    }

    pub fn sentence(&self) -> String {
        self.transcription.join(" ")
    }

    pub fn gloss_text(&self) -> String {
        self.gloss_line.join(" ")
    }

    pub fn gloss_at(&self, pos: usize) -> Option<&str> {
        if self.aligned {
            self.gloss_line.get(pos).map(String::as_str)
        } else {
            None
        }
    }
}

/// Line markers for one corpus dialect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Markers {
    pub transcription: String,
    pub segmentation: String,
    pub gloss: String,
    pub translation: String,
}

impl Default for Markers {
    fn default() -> Self {
        Markers {
            transcription: "t".into(),
            segmentation: "m".into(),
            gloss: "g".into(),
            translation: "l".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    UnknownMarker {
        line: usize,
        marker: String,
    },
    UnmarkedLine {
        line: usize,
    },
    DuplicateMarker {
        line: usize,
        marker: String,
    },
    /// NFC normalization would change this token; it is kept verbatim.
    NotNfc {
        line: usize,
        token: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedCorpus {
    pub entries: Vec<IgtEntry>,
    pub errors: Vec<ParseError>,
    pub warnings: Vec<ParseWarning>,
}

impl ParsedCorpus {
    pub fn misaligned(&self) -> usize {
        self.entries.iter().filter(|e| !e.aligned).count()
    }
}

fn is_ascii_ws(c: char) -> bool {
    c.is_ascii_whitespace()
}

pub fn tokenize(line: &str) -> Vec<String> {
    line.split_ascii_whitespace().map(str::to_string).collect()
}

pub fn parse_corpus(text: &str, language: &str, split: Split) -> ParsedCorpus {
    parse_corpus_with(text, language, split, &Markers::default())
}

pub fn parse_corpus_with(
    text: &str,
    language: &str,
    split: Split,
    markers: &Markers,
) -> ParsedCorpus {
    let mut out = ParsedCorpus::default();
    let mut block: Vec<(usize, &str)> = Vec::new();
    for (idx, line) in text.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim_matches(is_ascii_ws).is_empty() {
            if !block.is_empty() {
                parse_block(&block, language, split, markers, &mut out);
                block.clear();
            }
        } else {
            block.push((idx + 1, line));
        }
    }
    if !block.is_empty() {
        parse_block(&block, language, split, markers, &mut out);
    }
    out
}

fn parse_block(
    block: &[(usize, &str)],
    language: &str,
    split: Split,
    markers: &Markers,
    out: &mut ParsedCorpus,
) {
    let mut transcription: Option<(usize, &str)> = None;
    let mut gloss: Option<(usize, &str)> = None;
    let mut translation: Option<&str> = None;

    for &(lineno, line) in block {
        let Some(rest) = line.strip_prefix('\\') else {
            out.warnings
                .push(ParseWarning::UnmarkedLine { line: lineno });
            continue;
        };
        let (marker, content) = match rest.find(is_ascii_ws) {
            Some(i) => (&rest[..i], &rest[i + 1..]),
            None => (rest, ""),
        };
        let slot = if marker == markers.transcription {
            transcription.replace((lineno, content)).is_some()
        } else if marker == markers.gloss {
            gloss.replace((lineno, content)).is_some()
        } else if marker == markers.translation {
            translation.replace(content).is_some()
        } else if marker == markers.segmentation {
            false
        } else {
            out.warnings.push(ParseWarning::UnknownMarker {
                line: lineno,
                marker: marker.to_string(),
            });
            false
        };
        if slot {
            out.warnings.push(ParseWarning::DuplicateMarker {
                line: lineno,
                marker: marker.to_string(),
            });
        }
    }

    let start = block[0].0;
    let end = block[block.len() - 1].0;
    let Some((t_line, t_content)) = transcription else {
        out.errors
            .push(ParseError::MissingTranscription { start, end });
        return;
    };
    let tokens = tokenize(t_content);
    if tokens.is_empty() {
        out.errors
            .push(ParseError::MissingTranscription { start, end });
        return;
    }
    for token in &tokens {
        check_nfc(t_line, token, out);
    }
    let glosses = match gloss {
        Some((g_line, g_content)) => {
            let glosses = tokenize(g_content);
            for g in &glosses {
                check_nfc(g_line, g, out);
            }
            glosses
        }
        None => Vec::new(),
    };
    let translation = translation.unwrap_or("").trim_matches(is_ascii_ws);
    out.entries
        .push(IgtEntry::new(tokens, glosses, translation, language, split));
}

fn check_nfc(line: usize, token: &str, out: &mut ParsedCorpus) {
    if !unicode_normalization::is_nfc(token) {
        out.warnings.push(ParseWarning::NotNfc {
            line,
            token: token.to_string(),
        });
    }
}

pub fn serialize_entry(entry: &IgtEntry) -> String {
    serialize_entry_with(entry, &Markers::default())
}

pub fn serialize_entry_with(entry: &IgtEntry, markers: &Markers) -> String {
    let mut out = String::new();
    for (marker, content) in [
        (&markers.transcription, entry.sentence()),
        (&markers.gloss, entry.gloss_text()),
        (&markers.translation, entry.translation.clone()),
    ] {
        out.push('\\');
        out.push_str(marker);
        out.push(' ');
        out.push_str(&content);
        out.push('\n');
    }
    out.push('\n');
    out
}

pub fn serialize_corpus(entries: &[IgtEntry]) -> String {
    entries.iter().map(serialize_entry).collect()
}
