//! Protocol domain types and their structural (non-model) validation.
//!
//! Everything in here is a plain value type. Validation never fails; it
//! returns a [`ValidationReport`] whose entries carry machine-readable codes
//! so callers can turn them into reprompt feedback deterministically.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Case-insensitive token that marks a role as the summarizing language expert.
pub const LANGUAGE_EXPERT_TOKEN: &str = "language expert";

/// Case-insensitive prefix the last plan step must carry.
pub const FINAL_STEP_MARKER: &str = "language expert:";

/// How a role entered the team.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoleOrigin {
    SelectedExisting,
    #[default]
    NewlyCreated,
}

/// A generated expert role: prompt, description, toolset and suggestions.
///
/// Serialized with the exact keys models are asked to emit (`name`,
/// `description`, `tools`, `suggestions`, `prompt`). The origin is engine
/// bookkeeping and never leaves the process in serialized form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub description: String,
    #[serde(rename = "tools", default)]
    pub toolset: Vec<String>,
    #[serde(default)]
    pub suggestions: String,
    pub prompt: String,
    #[serde(skip)]
    pub origin: RoleOrigin,
}

impl AgentSpec {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        toolset: Vec<String>,
        suggestions: impl Into<String>,
        prompt: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            toolset,
            suggestions: suggestions.into(),
            prompt: prompt.into(),
            origin: RoleOrigin::NewlyCreated,
        }
    }

    pub fn with_origin(mut self, origin: RoleOrigin) -> Self {
        self.origin = origin;
        self
    }

    /// True if the name or description mentions the language expert token.
    pub fn is_language_expert(&self) -> bool {
        contains_ci(&self.name, LANGUAGE_EXPERT_TOKEN)
            || contains_ci(&self.description, LANGUAGE_EXPERT_TOKEN)
    }

    /// The role as a pretty JSON blob, in the shape models are asked for.
    pub fn to_blob(&self) -> String {
        serde_json::to_string_pretty(self).expect("agent spec serializes")
    }
}

/// Per-step engine bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepStatus {
    Pending,
    InProgress,
    Done,
}

/// One numbered step of an execution plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub index: usize,
    #[serde(rename = "agents")]
    pub assigned_agents: Vec<String>,
    pub description: String,
    #[serde(default)]
    pub expected_output: String,
    #[serde(default)]
    pub required_inputs: String,
}

impl PlanStep {
    pub fn new(index: usize, agents: &[&str], description: impl Into<String>) -> Self {
        Self {
            index,
            assigned_agents: agents.iter().map(|a| a.to_string()).collect(),
            description: description.into(),
            expected_output: String::new(),
            required_inputs: String::new(),
        }
    }

    /// `Agent A, Agent B: description`, the shape steps take inside prompts.
    pub fn render_line(&self) -> String {
        format!("{}: {}", self.assigned_agents.join(", "), self.description)
    }

    pub fn has_final_marker(&self) -> bool {
        starts_with_ci(self.render_line().trim_start(), FINAL_STEP_MARKER)
            || starts_with_ci(self.description.trim_start(), FINAL_STEP_MARKER)
    }
}

/// Ordered plan steps plus per-step status.
///
/// Status is not part of the serialized form: a deserialized plan starts
/// with every step pending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<PlanStep>", into = "Vec<PlanStep>")]
pub struct ExecutionPlan {
    steps: Vec<PlanStep>,
    status: Vec<StepStatus>,
}

impl From<Vec<PlanStep>> for ExecutionPlan {
    fn from(steps: Vec<PlanStep>) -> Self {
        Self::new(steps)
    }
}

impl From<ExecutionPlan> for Vec<PlanStep> {
    fn from(plan: ExecutionPlan) -> Self {
        plan.steps
    }
}

impl ExecutionPlan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        let status = vec![StepStatus::Pending; steps.len()];
        Self { steps, status }
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn status(&self, position: usize) -> Option<StepStatus> {
        self.status.get(position).copied()
    }

    pub fn set_status(&mut self, position: usize, status: StepStatus) {
        if let Some(slot) = self.status.get_mut(position) {
            *slot = status;
        }
    }

    /// Positions (0-based) of steps that are not done, in plan order.
    pub fn unfinished(&self) -> Vec<usize> {
        (0..self.steps.len())
            .filter(|&i| self.status[i] != StepStatus::Done)
            .collect()
    }

    /// Appends a step with the next contiguous index and returns its position.
    pub fn push_step(&mut self, agents: Vec<String>, description: String) -> usize {
        let index = self.steps.len() + 1;
        self.steps.push(PlanStep {
            index,
            assigned_agents: agents,
            description,
            expected_output: String::new(),
            required_inputs: String::new(),
        });
        self.status.push(StepStatus::Pending);
        self.steps.len() - 1
    }

    /// Numbered list used in prompts.
    pub fn render(&self) -> String {
        self.steps
            .iter()
            .map(|s| format!("{}. {}", s.index, s.render_line()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub text: String,
}

impl Task {
    /// Builds a task, rejecting empty text.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return None;
        }
        Some(Self {
            id: id.into(),
            text,
        })
    }
}

/// The team and plan under discussion in the drafting loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TeamDraft {
    pub selected_roles: Vec<AgentSpec>,
    pub created_roles: Vec<AgentSpec>,
    pub plan: ExecutionPlan,
    pub revision: u32,
}

#[derive(Deserialize)]
struct TeamDraftWire {
    #[serde(default)]
    selected_roles: Vec<AgentSpec>,
    #[serde(default)]
    created_roles: Vec<AgentSpec>,
    plan: ExecutionPlan,
    #[serde(default)]
    revision: u32,
}

impl<'de> Deserialize<'de> for TeamDraft {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = TeamDraftWire::deserialize(deserializer)?;
        Ok(TeamDraft::new(
            wire.selected_roles,
            wire.created_roles,
            wire.plan,
            wire.revision,
        ))
    }
}

impl TeamDraft {
    /// Builds a draft, stamping each role's origin from the list it came in.
    pub fn new(
        selected_roles: Vec<AgentSpec>,
        created_roles: Vec<AgentSpec>,
        plan: ExecutionPlan,
        revision: u32,
    ) -> Self {
        let selected_roles = selected_roles
            .into_iter()
            .map(|r| r.with_origin(RoleOrigin::SelectedExisting))
            .collect();
        let created_roles = created_roles
            .into_iter()
            .map(|r| r.with_origin(RoleOrigin::NewlyCreated))
            .collect();
        Self {
            selected_roles,
            created_roles,
            plan,
            revision,
        }
    }

    pub fn roles(&self) -> impl Iterator<Item = &AgentSpec> {
        self.selected_roles.iter().chain(self.created_roles.iter())
    }

    /// Finds a role by name, case-insensitively after trimming.
    pub fn role(&self, name: &str) -> Option<&AgentSpec> {
        let wanted = name.trim();
        self.roles()
            .find(|r| r.name.trim().eq_ignore_ascii_case(wanted))
    }

    pub fn language_expert(&self) -> Option<&AgentSpec> {
        self.roles().find(|r| r.is_language_expert())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("team draft serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NoSuggestions,
    HasSuggestions,
}

/// An observer's parsed feedback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub body: String,
    pub verdict: Verdict,
}

impl Critique {
    pub const SENTINEL: &'static str = "No Suggestions";

    /// Classifies a Suggestions section body.
    pub fn from_body(body: impl Into<String>) -> Self {
        let body = body.into();
        let verdict = if body.trim().eq_ignore_ascii_case(Self::SENTINEL) {
            Verdict::NoSuggestions
        } else {
            Verdict::HasSuggestions
        };
        Self { body, verdict }
    }

    pub fn is_clean(&self) -> bool {
        self.verdict == Verdict::NoSuggestions
    }
}

/// Machine-readable validation failure codes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationCode {
    EmptyName,
    EmptyPrompt,
    PromptMissingName,
    PromptMissingDescription,
    UnknownTool(String),
    DuplicateName(String),
    MissingLanguageExpert,
    MultipleLanguageExperts,
    EmptyPlan,
    EmptyAssignment,
    UnknownAgent(String),
    NonContiguousSteps,
    MissingFinalSummaryStep,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationCode::EmptyName => f.write_str("empty-name"),
            ViolationCode::EmptyPrompt => f.write_str("empty-prompt"),
            ViolationCode::PromptMissingName => f.write_str("prompt-missing-name"),
            ViolationCode::PromptMissingDescription => f.write_str("prompt-missing-description"),
            ViolationCode::UnknownTool(t) => write!(f, "unknown-tool:{t}"),
            ViolationCode::DuplicateName(n) => write!(f, "duplicate-name:{n}"),
            ViolationCode::MissingLanguageExpert => f.write_str("missing-language-expert"),
            ViolationCode::MultipleLanguageExperts => f.write_str("multiple-language-experts"),
            ViolationCode::EmptyPlan => f.write_str("empty-plan"),
            ViolationCode::EmptyAssignment => f.write_str("empty-assignment"),
            ViolationCode::UnknownAgent(a) => write!(f, "unknown-agent:{a}"),
            ViolationCode::NonContiguousSteps => f.write_str("non-contiguous-steps"),
            ViolationCode::MissingFinalSummaryStep => f.write_str("missing-final-summary-step"),
        }
    }
}

impl ViolationCode {
    /// The code without its argument, e.g. `unknown-tool`.
    pub fn kind(&self) -> &'static str {
        match self {
            ViolationCode::EmptyName => "empty-name",
            ViolationCode::EmptyPrompt => "empty-prompt",
            ViolationCode::PromptMissingName => "prompt-missing-name",
            ViolationCode::PromptMissingDescription => "prompt-missing-description",
            ViolationCode::UnknownTool(_) => "unknown-tool",
            ViolationCode::DuplicateName(_) => "duplicate-name",
            ViolationCode::MissingLanguageExpert => "missing-language-expert",
            ViolationCode::MultipleLanguageExperts => "multiple-language-experts",
            ViolationCode::EmptyPlan => "empty-plan",
            ViolationCode::EmptyAssignment => "empty-assignment",
            ViolationCode::UnknownAgent(_) => "unknown-agent",
            ViolationCode::NonContiguousSteps => "non-contiguous-steps",
            ViolationCode::MissingFinalSummaryStep => "missing-final-summary-step",
        }
    }
}

/// Where a violation was found.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Locus {
    Role(String),
    Step(usize),
    Team,
    Plan,
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locus::Role(name) => write!(f, "role '{name}'"),
            Locus::Step(i) => write!(f, "step {i}"),
            Locus::Team => f.write_str("team"),
            Locus::Plan => f.write_str("plan"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Violation {
    pub code: ViolationCode,
    pub locus: Locus,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.code, self.locus)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, code: ViolationCode, locus: Locus) {
        self.violations.push(Violation { code, locus });
    }

    fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn has_kind(&self, kind: &str) -> bool {
        self.violations.iter().any(|v| v.code.kind() == kind)
    }

    pub fn contains(&self, code: &ViolationCode) -> bool {
        self.violations.iter().any(|v| &v.code == code)
    }

    /// Order-independent view of the report.
    pub fn as_set(&self) -> BTreeSet<Violation> {
        self.violations.iter().cloned().collect()
    }

    /// One line per violation, for reprompts and CLI output.
    pub fn render(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("- {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn validate_agent_spec(spec: &AgentSpec, registered_tools: &HashSet<String>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let locus = || Locus::Role(spec.name.clone());
    let name = spec.name.trim();
    if name.is_empty() {
        report.push(ViolationCode::EmptyName, locus());
    }
    if spec.prompt.trim().is_empty() {
        report.push(ViolationCode::EmptyPrompt, locus());
    } else {
        if !name.is_empty() && !spec.prompt.contains(name) {
            report.push(ViolationCode::PromptMissingName, locus());
        }
        let description = spec.description.trim();
        if !description.is_empty() && !spec.prompt.contains(description) {
            report.push(ViolationCode::PromptMissingDescription, locus());
        }
    }
    let registered: HashSet<String> = registered_tools.iter().map(|t| tool_key(t)).collect();
    for tool in &spec.toolset {
        if !registered.contains(&tool_key(tool)) {
            report.push(ViolationCode::UnknownTool(tool.trim().to_string()), locus());
        }
    }
    report
}

pub fn validate_plan(plan: &ExecutionPlan, team: &TeamDraft) -> ValidationReport {
    let mut report = ValidationReport::default();
    let steps = plan.steps();
    if steps.is_empty() {
        report.push(ViolationCode::EmptyPlan, Locus::Plan);
        return report;
    }
    if steps.iter().enumerate().any(|(i, s)| s.index != i + 1) {
        report.push(ViolationCode::NonContiguousSteps, Locus::Plan);
    }
    for step in steps {
        if step.assigned_agents.is_empty() {
            report.push(ViolationCode::EmptyAssignment, Locus::Step(step.index));
        }
        for agent in &step.assigned_agents {
            if team.role(agent).is_none() {
                report.push(
                    ViolationCode::UnknownAgent(agent.trim().to_string()),
                    Locus::Step(step.index),
                );
            }
        }
    }
    let last = steps.last().expect("non-empty");
    if !last.has_final_marker() {
        report.push(ViolationCode::MissingFinalSummaryStep, Locus::Step(last.index));
    }
    report
}

pub fn validate_team(draft: &TeamDraft, registered_tools: &HashSet<String>) -> ValidationReport {
    let mut report = ValidationReport::default();
    for role in draft.roles() {
        report.extend(validate_agent_spec(role, registered_tools));
    }

    let mut counts: HashMap<String, usize> = HashMap::new();
    for role in draft.roles() {
        *counts.entry(role.name.trim().to_lowercase()).or_default() += 1;
    }
    let mut dupes: Vec<&String> = counts.iter().filter(|(_, &c)| c > 1).map(|(n, _)| n).collect();
    dupes.sort();
    for name in dupes {
        if name.is_empty() {
            continue;
        }
        // report the first spelling seen
        let shown = draft
            .roles()
            .find(|r| r.name.trim().to_lowercase() == *name)
            .map(|r| r.name.trim().to_string())
            .unwrap_or_default();
        report.push(ViolationCode::DuplicateName(shown), Locus::Team);
    }

    match draft.roles().filter(|r| r.is_language_expert()).count() {
        0 => report.push(ViolationCode::MissingLanguageExpert, Locus::Team),
        1 => {}
        _ => report.push(ViolationCode::MultipleLanguageExperts, Locus::Team),
    }

    report.extend(validate_plan(&draft.plan, draft));
    report
}

/// Canonical matching key for tool names: trimmed, lowercased.
pub fn tool_key(name: &str) -> String {
    name.trim().to_lowercase()
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(needle)
}

fn starts_with_ci(haystack: &str, prefix: &str) -> bool {
    haystack.to_lowercase().starts_with(prefix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tools(names: &[&str]) -> HashSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn role(name: &str, description: &str, toolset: &[&str]) -> AgentSpec {
        AgentSpec::new(
            name,
            description,
            toolset.iter().map(|s| s.to_string()).collect(),
            "keep it short",
            format!("You are {description}, named {name}. Your goal is to help."),
        )
    }

    fn registry() -> HashSet<String> {
        tools(&["Write File", "Final Output"])
    }

    #[test]
    fn empty_name_is_reported() {
        let spec = role("", "a writer", &[]);
        let report = validate_agent_spec(&spec, &registry());
        assert!(report.contains(&ViolationCode::EmptyName));
    }

    #[test]
    fn registered_subset_is_valid() {
        let spec = role("Programmer", "a Python developer", &["Write File"]);
        assert!(validate_agent_spec(&spec, &registry()).is_empty());
    }

    #[test]
    fn unregistered_tool_is_reported() {
        let spec = role("Researcher", "a web researcher", &["Google Search"]);
        let report = validate_agent_spec(&spec, &registry());
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].code.to_string(), "unknown-tool:Google Search");
    }

    #[test]
    fn prompt_must_mention_name_and_description() {
        let mut spec = role("Programmer", "a Python developer", &[]);
        spec.prompt = "You are helpful.".into();
        let report = validate_agent_spec(&spec, &registry());
        assert!(report.contains(&ViolationCode::PromptMissingName));
        assert!(report.contains(&ViolationCode::PromptMissingDescription));
    }

    fn small_team(steps: Vec<PlanStep>) -> TeamDraft {
        TeamDraft::new(
            vec![],
            vec![
                role("Researcher", "a fact finder", &[]),
                role("Language Expert", "a summarizer of results", &[]),
            ],
            ExecutionPlan::new(steps),
            0,
        )
    }

    #[test]
    fn unknown_agent_is_located_at_its_step() {
        let team = small_team(vec![
            PlanStep::new(1, &["Researcher"], "gather facts"),
            PlanStep::new(2, &["Ghost"], "haunt"),
            PlanStep::new(3, &["Language Expert"], "Based on the previous steps, answer"),
        ]);
        let report = validate_plan(&team.plan, &team);
        assert_eq!(
            report.violations,
            vec![Violation {
                code: ViolationCode::UnknownAgent("Ghost".into()),
                locus: Locus::Step(2)
            }]
        );
    }

    #[test]
    fn final_marker_from_agent_prefix() {
        let team = small_team(vec![
            PlanStep::new(1, &["Researcher"], "gather facts"),
            PlanStep::new(
                2,
                &["Language Expert"],
                "Based on the previous steps, please respond to the user's original question: X",
            ),
        ]);
        assert!(validate_plan(&team.plan, &team).is_empty());
        assert!(validate_team(&team, &registry()).is_empty());
    }

    #[test]
    fn final_marker_inside_description() {
        let team = small_team(vec![PlanStep::new(
            1,
            &["Language Expert"],
            "Language Expert: Based on the previous steps, respond",
        )]);
        assert!(!validate_plan(&team.plan, &team).has_kind("missing-final-summary-step"));
    }

    #[test]
    fn non_contiguous_indices() {
        let team = small_team(vec![
            PlanStep::new(1, &["Researcher"], "gather facts"),
            PlanStep::new(3, &["Language Expert"], "Based on the previous steps, answer"),
        ]);
        let report = validate_plan(&team.plan, &team);
        assert!(report.contains(&ViolationCode::NonContiguousSteps));
    }

    #[test]
    fn missing_final_step_marker() {
        let team = small_team(vec![PlanStep::new(1, &["Researcher"], "gather facts")]);
        assert!(validate_plan(&team.plan, &team).has_kind("missing-final-summary-step"));
    }

    #[test]
    fn duplicate_names_and_missing_expert() {
        let team = TeamDraft::new(
            vec![role("Game Designer", "designs rules", &[])],
            vec![role("Game Designer", "designs levels", &[])],
            ExecutionPlan::new(vec![PlanStep::new(1, &["Game Designer"], "design")]),
            0,
        );
        let report = validate_team(&team, &registry());
        assert!(report.contains(&ViolationCode::DuplicateName("Game Designer".into())));
        assert!(report.contains(&ViolationCode::MissingLanguageExpert));
    }

    #[test]
    fn two_language_experts_rejected() {
        let mut team = small_team(vec![PlanStep::new(
            1,
            &["Language Expert"],
            "Based on the previous steps, answer",
        )]);
        team.created_roles
            .push(role("Editor", "a language expert for grammar", &[]));
        assert!(validate_team(&team, &registry()).contains(&ViolationCode::MultipleLanguageExperts));
    }

    #[test]
    fn draft_json_uses_wire_keys_and_restores_origin() {
        let team = TeamDraft::new(
            vec![role("Researcher", "a fact finder", &["Write File"])],
            vec![role("Language Expert", "a summarizer", &[])],
            ExecutionPlan::new(vec![PlanStep::new(1, &["Language Expert"], "Based on it")]),
            2,
        );
        let json = team.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        let blob = &value["selected_roles"][0];
        for key in ["name", "description", "tools", "suggestions", "prompt"] {
            assert!(blob.get(key).is_some(), "missing {key}");
        }
        assert!(blob.get("origin").is_none());
        assert_eq!(value["plan"][0]["index"], 1);
        assert!(value["plan"][0].get("status").is_none());

        let back = TeamDraft::from_json(&json).unwrap();
        assert_eq!(back, team);
        assert_eq!(back.selected_roles[0].origin, RoleOrigin::SelectedExisting);
        assert_eq!(back.plan.status(0), Some(StepStatus::Pending));
    }

    #[test]
    fn critique_sentinel() {
        assert!(Critique::from_body("  No Suggestions \n").is_clean());
        assert!(Critique::from_body("no suggestions").is_clean());
        assert!(!Critique::from_body("No Suggestions, but add a tester").is_clean());
    }

    #[test]
    fn task_rejects_blank_text() {
        assert!(Task::new("t", "  ").is_none());
        assert!(Task::new("t", "write a poem").is_some());
    }
}
