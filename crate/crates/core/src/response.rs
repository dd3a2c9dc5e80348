//! Reading k-best gloss answers out of free-form model text.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ResponseError;

pub const MAX_CANDIDATES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KBestGlosses {
    pub word: String,
    /// Best first; between one and three entries.
    pub glosses: Vec<String>,
    pub raw_response: String,
    /// Word echoed by the model when it differs from the expected one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_mismatch: Option<String>,
}

impl KBestGlosses {
    pub fn new(word: impl Into<String>, glosses: Vec<String>) -> Self {
        KBestGlosses {
            word: word.into(),
            glosses,
            raw_response: String::new(),
            word_mismatch: None,
        }
    }

    pub fn best(&self) -> &str {
        &self.glosses[0]
    }
}

/// Byte range of the balanced `{...}` starting at `start`, skipping over
/// quoted strings.
fn balanced_object(text: &str, start: usize) -> Option<&str> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Rewrites single-quoted strings as double-quoted ones and drops trailing
/// commas before `]` or `}`.
fn lenient(json: &str) -> String {
    let mut out = String::with_capacity(json.len());
    let mut chars = json.chars().peekable();
    let mut in_double = false;
    let mut in_single = false;
    let mut escaped = false;
    while let Some(c) = chars.next() {
        if in_double {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_double = false;
            }
            continue;
        }
        if in_single {
            if escaped {
                escaped = false;
                if c == '\'' {
                    out.pop();
                }
                out.push(c);
            } else if c == '\\' {
                escaped = true;
                out.push(c);
            } else if c == '\'' {
                in_single = false;
                out.push('"');
            } else if c == '"' {
                out.push_str("\\\"");
            } else {
                out.push(c);
            }
            continue;
        }
        match c {
            '"' => {
                in_double = true;
                out.push(c);
            }
            '\'' => {
                in_single = true;
                out.push('"');
            }
            ',' => {
                let mut look = chars.clone();
                while look.peek().is_some_and(|c| c.is_whitespace()) {
                    look.next();
                }
                if !matches!(look.peek(), Some(']') | Some('}')) {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

fn parse_object(candidate: &str) -> Option<serde_json::Map<String, Value>> {
    let value: Value = serde_json::from_str(candidate)
        .ok()
        .or_else(|| serde_json::from_str(&lenient(candidate)).ok())?;
    match value {
        Value::Object(map) if map.get("glosses").is_some_and(Value::is_array) => Some(map),
        _ => None,
    }
}

fn usable(gloss: &str) -> bool {
    !gloss.is_empty() && !gloss.chars().any(char::is_whitespace) && !gloss.chars().all(|c| c == '_')
}

pub fn parse_llm_response(text: &str, expected_word: &str) -> Result<KBestGlosses, ResponseError> {
    let object = text
        .match_indices('{')
        .filter_map(|(i, _)| balanced_object(text, i))
        .find_map(parse_object)
        .ok_or_else(|| ResponseError::NoJson {
            raw: text.to_string(),
        })?;

    let glosses: Vec<String> = object["glosses"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(Value::as_str)
        .map(str::trim)
        .filter(|g| usable(g))
        .take(MAX_CANDIDATES)
        .map(str::to_string)
        .collect();
    if glosses.is_empty() {
        return Err(ResponseError::EmptyGlosses {
            raw: text.to_string(),
        });
    }
    let word_mismatch = match object.get("word").and_then(Value::as_str) {
        Some(w) if w.trim() != expected_word => Some(w.to_string()),
        _ => None,
    };
    Ok(KBestGlosses {
        word: expected_word.to_string(),
        glosses,
        raw_response: text.to_string(),
        word_mismatch,
    })
}

/// The canonical JSON answer for a k-best list.
pub fn render_response(kbest: &KBestGlosses) -> String {
    serde_json::json!({ "word": kbest.word, "glosses": kbest.glosses }).to_string()
}
