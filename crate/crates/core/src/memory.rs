//! Short-term, long-term and dynamic memory.
//!
//! Both tiers live in one append-only store with a shared sequence counter.
//! Dynamic memory is a query: it picks entries for one agent by priority and
//! trims them to an estimated token budget.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::execution::{RefinementAction, StepOutcome, StepResult};

/// Agent name used for run-scoped entries.
pub const RUN_SCOPE: &str = "run";

pub const DEFAULT_BUDGET: usize = 6000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MemoryError {
    #[error("commit-failed-step: step {0} failed and cannot be committed")]
    CommitFailedStep(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    ShortTerm,
    LongTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    Thought,
    Plan,
    Observation,
    Summary,
    TaskRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub seq: u64,
    pub scope: Scope,
    pub agent: String,
    pub step_index: usize,
    pub kind: EntryKind,
    pub text: String,
    /// Set on task records committed from a forced-final step.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub forced: bool,
}

impl MemoryEntry {
    /// The line this entry contributes to a rendered bundle, newline included.
    pub fn render(&self) -> String {
        let kind = match self.kind {
            EntryKind::Thought => "thought",
            EntryKind::Plan => "plan",
            EntryKind::Observation => "observation",
            EntryKind::Summary => "summary",
            EntryKind::TaskRecord => "task record",
        };
        let forced = if self.forced { ", forced" } else { "" };
        format!(
            "[step {} | {} | {kind}{forced}] {}\n",
            self.step_index, self.agent, self.text
        )
    }

    /// Estimated tokens of the rendered line.
    pub fn cost(&self) -> usize {
        estimate_tokens(&self.render())
    }

    /// Lower is kept first. Ties break newest first.
    fn priority(&self) -> u8 {
        match (self.scope, self.kind) {
            (Scope::LongTerm, _) => 0,
            (_, EntryKind::Summary) => 1,
            (_, EntryKind::Observation) => 2,
            _ => 3,
        }
    }
}

/// Characters divided by four, rounded up. An estimate, not a tokenizer.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ContextBundle {
    /// Kept entries in seq order.
    pub entries: Vec<MemoryEntry>,
    pub rendered: String,
    pub budget_used: usize,
}

impl ContextBundle {
    fn from_entries(entries: Vec<MemoryEntry>) -> Self {
        let rendered = entries.iter().map(MemoryEntry::render).collect();
        let budget_used = entries.iter().map(MemoryEntry::cost).sum();
        Self {
            entries,
            rendered,
            budget_used,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Keeps the highest-priority entries whose total cost fits `budget`.
///
/// Entries are ranked task records, then summaries, then observations, then
/// everything else, newest first within a rank. Lowest-ranked entries are
/// dropped until the rest fit, so the kept set is always a prefix of that
/// ranking; entries are never split. The result is in seq order.
pub fn trim_to_budget(entries: &[MemoryEntry], budget: usize) -> Vec<MemoryEntry> {
    let mut ranked: Vec<&MemoryEntry> = entries.iter().collect();
    ranked.sort_by_key(|e| (e.priority(), std::cmp::Reverse(e.seq)));
    let mut used = 0;
    let mut kept: Vec<MemoryEntry> = Vec::new();
    for entry in ranked {
        let cost = entry.cost();
        if used + cost > budget {
            break;
        }
        used += cost;
        kept.push(entry.clone());
    }
    kept.sort_by_key(|e| e.seq);
    kept
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MemoryStore {
    entries: Vec<MemoryEntry>,
    next_seq: u64,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn long_term(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.iter().filter(|e| e.scope == Scope::LongTerm)
    }

    fn push(&mut self, scope: Scope, agent: &str, step_index: usize, kind: EntryKind, text: &str) -> &MemoryEntry {
        self.next_seq += 1;
        self.entries.push(MemoryEntry {
            seq: self.next_seq,
            scope,
            agent: agent.to_string(),
            step_index,
            kind,
            text: text.to_string(),
            forced: false,
        });
        self.entries.last().expect("just pushed")
    }

    /// Records an action's thought, plan and observation.
    pub fn append_short_term(&mut self, agent: &str, step_index: usize, action: &RefinementAction) {
        self.push(Scope::ShortTerm, agent, step_index, EntryKind::Thought, &action.thought);
        self.push(Scope::ShortTerm, agent, step_index, EntryKind::Plan, &action.plan);
        self.push(Scope::ShortTerm, agent, step_index, EntryKind::Observation, &action.observation);
    }

    /// Records the summary an agent produced for a step.
    pub fn append_summary(&mut self, agent: &str, step_index: usize, text: &str) -> &MemoryEntry {
        self.push(Scope::ShortTerm, agent, step_index, EntryKind::Summary, text)
    }

    /// Records a finished step as one run-scoped task record.
    pub fn commit_long_term(&mut self, result: &StepResult) -> Result<MemoryEntry, MemoryError> {
        if result.status == StepOutcome::Failed {
            return Err(MemoryError::CommitFailedStep(result.step_index));
        }
        let text = format!(
            "{}: {}\nOutput: {}",
            result.agents.join(", "),
            result.step_text,
            result.final_output
        );
        self.push(Scope::LongTerm, RUN_SCOPE, result.step_index, EntryKind::TaskRecord, &text);
        let entry = self.entries.last_mut().expect("just pushed");
        entry.forced = result.status == StepOutcome::ForcedFinal;
        Ok(entry.clone())
    }

    /// Context for `agent`: all task records, its summaries and its
    /// observations, trimmed to `budget`. Other agents' working state is
    /// never included.
    pub fn assemble_dynamic_context(&self, agent: &str, budget: usize) -> ContextBundle {
        let wanted = agent.trim();
        let candidates: Vec<MemoryEntry> = self
            .entries
            .iter()
            .filter(|e| match (e.scope, e.kind) {
                (Scope::LongTerm, _) => true,
                (Scope::ShortTerm, EntryKind::Summary | EntryKind::Observation) => {
                    e.agent.trim().eq_ignore_ascii_case(wanted)
                }
                _ => false,
            })
            .cloned()
            .collect();
        ContextBundle::from_entries(trim_to_budget(&candidates, budget))
    }

    /// Task records only, trimmed to `budget`.
    pub fn long_term_digest(&self, budget: usize) -> ContextBundle {
        let records: Vec<MemoryEntry> = self.long_term().cloned().collect();
        ContextBundle::from_entries(trim_to_budget(&records, budget))
    }
}
