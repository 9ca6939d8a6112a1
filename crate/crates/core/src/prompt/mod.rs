//! Prompt templates and the parsers for what models send back.
//!
//! Templates use single-brace `{placeholder}` markers with doubled braces as
//! literal escapes, the same convention as Python's `str.format`. The five
//! stock templates ship as assets and can be overridden from a directory.

mod blobs;
mod formats;
mod parse;
mod sections;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blobs::{extract_role_blobs, BlobError};
pub use formats::{format_example, format_write_file_payload};
pub use parse::{
    FINAL_OUTPUT,
    check_action, parse_agent_action, parse_critique, parse_next_step, parse_plan_steps,
    parse_thought, parse_write_file_payload, AgentActionParse, NextStepParse, ParseError,
    ParseWarning, WriteFilePayload,
};
pub use sections::{find_section, Occurrence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptKind {
    Planner,
    AgentObserver,
    PlanObserver,
    ActionObserver,
    CustomAgent,
}

impl PromptKind {
    pub const ALL: [PromptKind; 5] = [
        PromptKind::Planner,
        PromptKind::AgentObserver,
        PromptKind::PlanObserver,
        PromptKind::ActionObserver,
        PromptKind::CustomAgent,
    ];

    /// Asset file name, also used for override directories.
    pub fn file_name(self) -> &'static str {
        match self {
            PromptKind::Planner => "planner.txt",
            PromptKind::AgentObserver => "agent_observer.txt",
            PromptKind::PlanObserver => "plan_observer.txt",
            PromptKind::ActionObserver => "action_observer.txt",
            PromptKind::CustomAgent => "custom_agent.txt",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PromptKind::Planner => "planner",
            PromptKind::AgentObserver => "agent-observer",
            PromptKind::PlanObserver => "plan-observer",
            PromptKind::ActionObserver => "action-observer",
            PromptKind::CustomAgent => "custom-agent",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            PromptKind::Planner => include_str!("../../assets/templates/planner.txt"),
            PromptKind::AgentObserver => include_str!("../../assets/templates/agent_observer.txt"),
            PromptKind::PlanObserver => include_str!("../../assets/templates/plan_observer.txt"),
            PromptKind::ActionObserver => include_str!("../../assets/templates/action_observer.txt"),
            PromptKind::CustomAgent => include_str!("../../assets/templates/custom_agent.txt"),
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("missing-binding: {0}")]
    MissingBinding(String),
    #[error("template override {path}: {reason}")]
    Override { path: String, reason: String },
}

/// Placeholder name to value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings(BTreeMap<String, String>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, key: &str, value: impl Into<String>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn insert(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Bindings {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

enum Piece<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

/// Splits a template into literal runs and placeholders.
fn pieces(template: &str) -> Vec<Piece<'_>> {
    let bytes = template.as_bytes();
    let mut out = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push(Piece::Literal(&template[literal_start..i + 1]));
                i += 2;
                literal_start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push(Piece::Literal(&template[literal_start..i + 1]));
                i += 2;
                literal_start = i;
            }
            b'{' => {
                let rest = &bytes[i + 1..];
                let len = rest
                    .iter()
                    .take_while(|b| b.is_ascii_alphanumeric() || **b == b'_')
                    .count();
                let starts_ok = rest.first().is_some_and(|b| b.is_ascii_alphabetic() || *b == b'_');
                if starts_ok && rest.get(len) == Some(&b'}') {
                    out.push(Piece::Literal(&template[literal_start..i]));
                    out.push(Piece::Placeholder(&template[i + 1..i + 1 + len]));
                    i += len + 2;
                    literal_start = i;
                } else {
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    out.push(Piece::Literal(&template[literal_start..]));
    out
}

/// Placeholder names in order of first appearance.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut seen = Vec::new();
    for piece in pieces(template) {
        if let Piece::Placeholder(name) = piece {
            if !seen.iter().any(|s: &String| s == name) {
                seen.push(name.to_string());
            }
        }
    }
    seen
}

/// Substitutes every placeholder; `{{`/`}}` collapse to literal braces.
pub fn render_template(template: &str, bindings: &Bindings) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + 256);
    for piece in pieces(template) {
        match piece {
            Piece::Literal(s) => out.push_str(s),
            Piece::Placeholder(name) => {
                let value = bindings
                    .get(name)
                    .ok_or_else(|| PromptError::MissingBinding(name.to_string()))?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

/// The five templates in use for a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<PromptKind, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            templates: PromptKind::ALL
                .iter()
                .map(|&k| (k, k.builtin().to_string()))
                .collect(),
        }
    }

    /// Built-in templates, replaced by any `<kind>.txt` found in `dir`.
    pub fn with_overrides(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let mut set = Self::builtin();
        for kind in PromptKind::ALL {
            let path = dir.join(kind.file_name());
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Override {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })?;
                set.templates.insert(kind, text);
            }
        }
        Ok(set)
    }

    pub fn set(&mut self, kind: PromptKind, template: impl Into<String>) {
        self.templates.insert(kind, template.into());
    }

    pub fn template(&self, kind: PromptKind) -> &str {
        &self.templates[&kind]
    }

    pub fn placeholders(&self, kind: PromptKind) -> Vec<String> {
        placeholders(self.template(kind))
    }

    pub fn render(&self, kind: PromptKind, bindings: &Bindings) -> Result<String, PromptError> {
        render_template(self.template(kind), bindings)
    }
}

/// Renders one of the stock templates.
pub fn render_prompt(kind: PromptKind, bindings: &Bindings) -> Result<String, PromptError> {
    render_template(kind.builtin(), bindings)
}
