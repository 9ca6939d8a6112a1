//! Drafting: the Planner proposes a team and plan, the Agent Observer and
//! Plan Observer critique it, and the Planner revises until both observers
//! approve in the same round or the round cap is reached.

use std::collections::HashSet;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::exchange::{Caller, ExchangeError};
use crate::prompt::{
    extract_role_blobs, find_section, format_example, parse_critique, parse_plan_steps, BlobError,
    Bindings, Occurrence, PromptError, PromptKind, TemplateSet,
};
use crate::provider::ProviderError;
use crate::schema::{
    validate_team, AgentSpec, Critique, ExecutionPlan, Task, TeamDraft, ValidationReport,
};
use crate::toolkit::ToolRegistry;
use crate::trace::TraceError;

pub const DEFAULT_ROUND_CAP: u32 = 3;

const PLANNER_SECTIONS: [&str; 7] = [
    "Thought",
    "Question or Task",
    "Selected Roles List",
    "Created Roles List",
    "Execution Plan",
    "RoleFeedback",
    "PlanFeedback",
];

#[derive(Debug, Error)]
pub enum DraftingError {
    #[error("drafting-failed in round {round}: {reason}")]
    Failed { round: u32, reason: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl DraftingError {
    pub fn code(&self) -> &'static str {
        match self {
            DraftingError::Failed { .. } => "drafting-failed",
            DraftingError::Provider(e) => e.class(),
            DraftingError::Prompt(_) => "prompt",
        }
    }
}

impl From<TraceError> for DraftingError {
    fn from(err: TraceError) -> Self {
        DraftingError::Provider(ProviderError::Trace(err))
    }
}

/// Planner output that failed the code-level checks.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("structural-reject: {}", .codes.join(", "))]
pub struct StructuralReject {
    /// Machine-readable codes, e.g. `malformed-blob`, `unknown-agent:Tester`.
    pub codes: Vec<String>,
    pub report: ValidationReport,
    /// The feedback sent back to the planner.
    pub message: String,
}

impl StructuralReject {
    fn parse_failure(code: &str, detail: String) -> Self {
        Self {
            codes: vec![code.to_string()],
            report: ValidationReport::default(),
            message: format!(
                "The draft could not be read.\n- {code}: {detail}"
            ),
        }
    }

    fn validation(report: ValidationReport) -> Self {
        Self {
            codes: report.violations.iter().map(|v| v.code.to_string()).collect(),
            message: format!(
                "The draft failed structural validation:\n{}",
                report.render()
            ),
            report,
        }
    }
}

fn section<'a>(raw: &'a str, name: &str) -> Option<&'a str> {
    find_section(raw, name, &PLANNER_SECTIONS, Occurrence::Last, false)
}

fn roles_in(text: &str) -> Result<Vec<AgentSpec>, StructuralReject> {
    match extract_role_blobs(text) {
        Ok(specs) => Ok(specs),
        Err(BlobError::NoBlobsFound) => Ok(Vec::new()),
        Err(err @ BlobError::MalformedBlob { .. }) => {
            Err(StructuralReject::parse_failure("malformed-blob", err.to_string()))
        }
    }
}

/// Parses planner output into a draft and validates it.
///
/// Roles are read from the Selected Roles List and Created Roles List
/// sections, the plan from the Execution Plan section. Without those
/// headers the whole reply is scanned and every role counts as created.
pub fn structural_gate(
    raw: &str,
    registered_tools: &HashSet<String>,
    revision: u32,
) -> Result<TeamDraft, StructuralReject> {
    let selected_text = section(raw, "Selected Roles List");
    let created_text = section(raw, "Created Roles List");
    let (selected, created) = if selected_text.is_none() && created_text.is_none() {
        (Vec::new(), roles_in(raw)?)
    } else {
        (
            roles_in(selected_text.unwrap_or(""))?,
            roles_in(created_text.unwrap_or(""))?,
        )
    };
    if selected.is_empty() && created.is_empty() {
        return Err(StructuralReject::parse_failure(
            "no-blobs-found",
            "no role JSON blobs were found".into(),
        ));
    }
    let plan_text = section(raw, "Execution Plan").unwrap_or(raw);
    let steps = parse_plan_steps(plan_text)
        .map_err(|e| StructuralReject::parse_failure(e.code(), e.to_string()))?;
    let draft = TeamDraft::new(selected, created, ExecutionPlan::new(steps), revision);
    let report = validate_team(&draft, registered_tools);
    if report.is_empty() {
        Ok(draft)
    } else {
        Err(StructuralReject::validation(report))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DraftOutcome {
    InProgress,
    Converged,
    CapReached,
    Failed,
}

/// One transcript entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Turn {
    pub round: u32,
    pub speaker: PromptKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DraftingState {
    pub task: Task,
    pub draft: Option<TeamDraft>,
    pub round: u32,
    pub round_cap: u32,
    pub history: Vec<Turn>,
    pub outcome: DraftOutcome,
    pub last_critiques: Option<(Critique, Critique)>,
}

impl DraftingState {
    fn new(task: &Task, round_cap: u32) -> Self {
        Self {
            task: task.clone(),
            draft: None,
            round: 0,
            round_cap,
            history: Vec::new(),
            outcome: DraftOutcome::InProgress,
            last_critiques: None,
        }
    }

    /// Prior observer critiques, oldest first.
    pub fn critique_history(&self) -> String {
        self.history
            .iter()
            .filter(|t| t.speaker != PromptKind::Planner)
            .map(|t| format!("Round {} {}:\n{}", t.round, t.speaker.label(), t.text.trim()))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DraftingResult {
    pub team: TeamDraft,
    pub outcome: DraftOutcome,
    pub rounds: u32,
    pub transcript: Vec<Turn>,
}

/// The two critiques of one round, as fed back to the planner.
pub fn render_suggestions(agent: &Critique, plan: &Critique) -> String {
    format!(
        "Suggestions on the expert roles:\n{}\n\nSuggestions on the execution plan:\n{}",
        agent.body.trim(),
        plan.body.trim()
    )
}

fn render_role_blobs(roles: &[AgentSpec]) -> String {
    if roles.is_empty() {
        return "None".into();
    }
    roles
        .iter()
        .map(AgentSpec::to_blob)
        .collect::<Vec<_>>()
        .join(",\n")
}

pub struct Drafter<'a> {
    caller: Caller<'a>,
    templates: &'a TemplateSet,
    tools: &'a ToolRegistry,
    round_cap: u32,
    existing_roles: &'a str,
}

impl<'a> Drafter<'a> {
    pub(crate) fn new(
        caller: Caller<'a>,
        templates: &'a TemplateSet,
        tools: &'a ToolRegistry,
        round_cap: u32,
        existing_roles: &'a str,
    ) -> Self {
        Self {
            caller,
            templates,
            tools,
            round_cap: round_cap.max(1),
            existing_roles,
        }
    }

    fn existing_roles(&self) -> &str {
        if self.existing_roles.trim().is_empty() {
            "None"
        } else {
            self.existing_roles
        }
    }

    fn exhausted(round: u32, err: ExchangeError) -> DraftingError {
        match err {
            ExchangeError::Provider(p) => DraftingError::Provider(p),
            ExchangeError::Exhausted { tag, last_error, .. } => DraftingError::Failed {
                round,
                reason: format!("{tag} reprompt budget exhausted; last error: {last_error}"),
            },
        }
    }

    pub fn planner_prompt(&self, task: &Task, history: &str, suggestions: &str) -> Result<String, PromptError> {
        let bindings = Bindings::new()
            .set("context", &task.text)
            .set("existing_roles", self.existing_roles())
            .set("history", history)
            .set("tools", self.tools.render())
            .set("format_example", format_example(PromptKind::Planner, &[]))
            .set("suggestions", suggestions);
        self.templates.render(PromptKind::Planner, &bindings)
    }

    fn propose(&self, state: &mut DraftingState, suggestions: &str) -> Result<TeamDraft, DraftingError> {
        let prompt = self.planner_prompt(&state.task, &state.critique_history(), suggestions)?;
        let registry = self.tools.name_set();
        let revision = state.round - 1;
        let round = state.round;
        let (draft, raw) = self
            .caller
            .call_parsed(PromptKind::Planner.label(), &prompt, |raw| {
                structural_gate(raw, &registry, revision).map_err(|r| r.message)
            })
            .map_err(|e| Self::exhausted(round, e))?;
        state.history.push(Turn {
            round,
            speaker: PromptKind::Planner,
            text: raw,
        });
        Ok(draft)
    }

    fn critique(
        &self,
        state: &mut DraftingState,
        kind: PromptKind,
        prompt: String,
    ) -> Result<Critique, DraftingError> {
        let round = state.round;
        let (critique, raw) = self
            .caller
            .call_parsed(kind.label(), &prompt, |raw| parse_critique(raw).map_err(|e| e.to_string()))
            .map_err(|e| Self::exhausted(round, e))?;
        state.history.push(Turn {
            round,
            speaker: kind,
            text: raw,
        });
        Ok(critique)
    }

    /// Agent Observer then Plan Observer on `draft`.
    pub fn critique_round(
        &self,
        state: &mut DraftingState,
        draft: &TeamDraft,
    ) -> Result<(Critique, Critique), DraftingError> {
        let history = state.critique_history();
        let agent_prompt = self.templates.render(
            PromptKind::AgentObserver,
            &Bindings::new()
                .set("question", &state.task.text)
                .set("existing_roles", self.existing_roles())
                .set("selected_roles", render_role_blobs(&draft.selected_roles))
                .set("created_roles", render_role_blobs(&draft.created_roles))
                .set("history", &history)
                .set("tools", self.tools.render())
                .set("format_example", format_example(PromptKind::AgentObserver, &[])),
        )?;
        let agent = self.critique(state, PromptKind::AgentObserver, agent_prompt)?;

        let all_roles: Vec<AgentSpec> = draft.roles().cloned().collect();
        let plan_prompt = self.templates.render(
            PromptKind::PlanObserver,
            &Bindings::new()
                .set("context", &state.task.text)
                .set("roles", render_role_blobs(&all_roles))
                .set("plan", draft.plan.render())
                .set("history", &history)
                .set("format_example", format_example(PromptKind::PlanObserver, &[])),
        )?;
        let plan = self.critique(state, PromptKind::PlanObserver, plan_prompt)?;
        Ok((agent, plan))
    }

    /// Runs the drafting loop to convergence or the round cap.
    pub fn run(&self, task: &Task) -> Result<DraftingResult, DraftingError> {
        let mut state = DraftingState::new(task, self.round_cap);
        let mut suggestions = String::new();
        while state.round < state.round_cap {
            state.round += 1;
            self.caller
                .transition("drafting-round", json!({"round": state.round}))?;
            let draft = match self.propose(&mut state, &suggestions) {
                Ok(draft) => draft,
                Err(err) => {
                    state.outcome = DraftOutcome::Failed;
                    self.caller.transition(
                        "drafting-failed",
                        json!({"round": state.round, "error": err.to_string()}),
                    )?;
                    return Err(err);
                }
            };
            state.draft = Some(draft.clone());
            let (agent, plan) = self.critique_round(&mut state, &draft)?;
            let clean = agent.is_clean() && plan.is_clean();
            suggestions = render_suggestions(&agent, &plan);
            state.last_critiques = Some((agent, plan));
            if clean {
                state.outcome = DraftOutcome::Converged;
                break;
            }
        }
        if state.outcome == DraftOutcome::InProgress {
            state.outcome = DraftOutcome::CapReached;
        }
        let team = state.draft.clone().expect("at least one round ran");
        self.caller.transition(
            "drafting-done",
            json!({
                "outcome": state.outcome,
                "rounds": state.round,
                "roles": team.roles().map(|r| r.name.clone()).collect::<Vec<_>>(),
                "steps": team.plan.len(),
            }),
        )?;
        Ok(DraftingResult {
            team,
            outcome: state.outcome,
            rounds: state.round,
            transcript: state.history,
        })
    }
}
