//! Versioned prompt templates.
//!
//! A template asset is a UTF-8 file split into named sections by lines of
//! the form `@@ name`. Sections contain `{{slot}}` placeholders which are
//! filled in a single pass; substituted values are never re-scanned.

use alloc::collections::BTreeMap;
use alloc::string::String;

pub const GLOSS_TEMPLATE_V1: &str = include_str!("../templates/v1/gloss_prompt.txt");
pub const INSTRUCTION_TEMPLATE_V1: &str = include_str!("../templates/v1/instruction_prompt.txt");

pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template<'a> {
    pub version: &'a str,
    sections: BTreeMap<&'a str, &'a str>,
}

impl<'a> Template<'a> {
    pub fn parse(version: &'a str, source: &'a str) -> Self {
        let mut sections = BTreeMap::new();
        let mut current: Option<(&str, usize)> = None;
        let mut offset = 0;
        for line in source.split_inclusive('\n') {
            if let Some(name) = line.strip_prefix("@@ ") {
                if let Some((prev, start)) = current.take() {
                    sections.insert(prev, trim_newline(&source[start..offset]));
                }
                current = Some((name.trim_end(), offset + line.len()));
            }
            offset += line.len();
        }
        if let Some((prev, start)) = current {
            sections.insert(prev, trim_newline(&source[start..]));
        }
        Template { version, sections }
    }

    pub fn section(&self, name: &str) -> &'a str {
        self.sections
            .get(name)
            .copied()
            .unwrap_or_else(|| panic!("template {} has no section {name:?}", self.version))
    }

    pub fn render(&self, name: &str, slots: &[(&str, &str)]) -> String {
        fill(self.section(name), slots)
    }
}

fn trim_newline(s: &str) -> &str {
    s.strip_suffix('\n').unwrap_or(s)
}

pub fn gloss_template() -> Template<'static> {
    Template::parse(TEMPLATE_VERSION, GLOSS_TEMPLATE_V1)
}

pub fn instruction_template() -> Template<'static> {
    Template::parse(TEMPLATE_VERSION, INSTRUCTION_TEMPLATE_V1)
}

/// Replaces `{{name}}` placeholders. Unknown placeholders are left as is.
pub fn fill(text: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = &after[..end];
                match slots.iter().find(|(k, _)| *k == name) {
                    Some((_, value)) => out.push_str(value),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
