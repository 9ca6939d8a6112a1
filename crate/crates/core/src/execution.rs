//! Execution: the Action Observer picks the next step, the assigned agents
//! work it through self-refinement (one agent) or turn-taking collaborative
//! refinement (several), and each finished step is committed to memory.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::exchange::{Caller, ExchangeError};
use crate::memory::{MemoryError, MemoryStore};
use crate::prompt::{
    format_example, parse_agent_action, parse_next_step, parse_thought, Bindings, PromptError,
    PromptKind, TemplateSet, FINAL_OUTPUT,
};
use crate::provider::ProviderError;
use crate::schema::{validate_team, AgentSpec, ExecutionPlan, StepStatus, Task, TeamDraft};
use crate::toolkit::{ToolRegistry, Workspace, WRITE_FILE};
use crate::trace::{EventKind, TraceError};

pub const DEFAULT_REFINEMENT_CAP: u32 = 5;
pub const DEFAULT_COLLAB_ROUNDS: u32 = 5;
pub const DEFAULT_MAX_SYNTHESIZED: usize = 2;

#[derive(Debug, Error)]
pub enum ExecutionError {
    #[error("execution-failed at step {step_index}: {cause}")]
    ExecutionFailed { step_index: usize, cause: String },
    #[error("invalid-team: {0}")]
    InvalidTeam(String),
    #[error("unknown-agent: {0}")]
    UnknownAgent(String),
    #[error("selection failed: {0}")]
    Selection(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

impl ExecutionError {
    pub fn code(&self) -> &'static str {
        match self {
            ExecutionError::ExecutionFailed { .. } => "execution-failed",
            ExecutionError::InvalidTeam(_) => "invalid-team",
            ExecutionError::UnknownAgent(_) => "unknown-agent",
            ExecutionError::Selection(_) => "selection-failed",
            ExecutionError::Provider(e) => e.class(),
            ExecutionError::Prompt(_) => "prompt",
            ExecutionError::Memory(_) => "commit-failed-step",
        }
    }
}

impl From<TraceError> for ExecutionError {
    fn from(err: TraceError) -> Self {
        ExecutionError::Provider(ProviderError::Trace(err))
    }
}

/// One refinement iteration: thought, plan, and the resulting observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementAction {
    /// Iteration (self-refinement) or round (collaborative), from 1.
    pub iteration: u32,
    pub agent: String,
    pub thought: String,
    /// The CurrentStep the agent committed to.
    pub plan: String,
    /// Canonical tool name, the raw Action when unknown, empty when the
    /// reply could not be parsed.
    pub tool_used: String,
    pub action_input: String,
    pub observation: String,
}

impl RefinementAction {
    fn render(&self) -> String {
        let mut out = format!(
            "Response {} ({}):\nThought: {}\nCurrentStep: {}\nAction: {}\n",
            self.iteration, self.agent, self.thought, self.plan, self.tool_used
        );
        // file contents are summarized by the observation
        if !self.action_input.is_empty() && self.tool_used != WRITE_FILE {
            out.push_str(&format!("ActionInput: {}\n", self.action_input));
        }
        out.push_str(&format!("Observation: {}\n", self.observation));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOutcome {
    Completed,
    ForcedFinal,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    /// 1-based plan index.
    pub step_index: usize,
    pub step_text: String,
    pub agents: Vec<String>,
    pub actions: Vec<RefinementAction>,
    pub final_output: String,
    pub status: StepOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionOutcome {
    InProgress,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionState {
    pub plan: ExecutionPlan,
    pub results: Vec<StepResult>,
    pub history_digest: String,
    pub outcome: ExecutionOutcome,
    /// Steps in the drafted plan; later positions were synthesized.
    pub original_len: usize,
    pub synthesized: usize,
}

impl ExecutionState {
    pub fn new(plan: ExecutionPlan) -> Self {
        Self {
            original_len: plan.len(),
            plan,
            results: Vec::new(),
            history_digest: String::new(),
            outcome: ExecutionOutcome::InProgress,
            synthesized: 0,
        }
    }

    pub fn result_for(&self, step_index: usize) -> Option<&StepResult> {
        self.results.iter().rev().find(|r| r.step_index == step_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionKind {
    /// The observer's choice matched an unfinished plan step.
    Matched,
    /// The observer named a step outside the plan; it was appended.
    Synthesized,
    /// Unmatched and the synthesized-step bound is spent: first unfinished.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Selection {
    /// 0-based plan position.
    pub position: usize,
    pub agent_names: Vec<String>,
    pub step_text: String,
    pub extracted_history: Option<String>,
    pub kind: SelectionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionReport {
    pub final_answer: String,
    pub state: ExecutionState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionSettings {
    pub refinement_cap: u32,
    pub collab_rounds: u32,
    pub forced_final: bool,
    pub max_synthesized: usize,
    pub memory_budget: usize,
}

impl Default for ExecutionSettings {
    fn default() -> Self {
        Self {
            refinement_cap: DEFAULT_REFINEMENT_CAP,
            collab_rounds: DEFAULT_COLLAB_ROUNDS,
            forced_final: true,
            max_synthesized: DEFAULT_MAX_SYNTHESIZED,
            memory_budget: crate::memory::DEFAULT_BUDGET,
        }
    }
}

/// What an agent is working on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepContext<'t> {
    pub task: &'t str,
    pub step_index: usize,
    pub step_text: &'t str,
    pub relevant_history: Option<&'t str>,
}

fn collapse(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn same_agents(a: &[String], b: &[String]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.trim().eq_ignore_ascii_case(y.trim()))
}

/// The unfinished step the observer's choice refers to, if any.
pub fn match_step(plan: &ExecutionPlan, choice: &crate::prompt::NextStepParse) -> Option<usize> {
    let unfinished = plan.unfinished();
    let full = collapse(&choice.full_text());
    let text = collapse(&choice.step_text);
    unfinished
        .iter()
        .copied()
        .find(|&p| {
            let step = &plan.steps()[p];
            collapse(&step.render_line()) == full || collapse(&step.description) == text
        })
        .or_else(|| {
            let hint = choice.index_hint?;
            unfinished.iter().copied().find(|&p| {
                let step = &plan.steps()[p];
                step.index == hint && same_agents(&step.assigned_agents, &choice.agent_names)
            })
        })
}

fn digest(actions: &[RefinementAction], limit: u32) -> String {
    let mut out = format!("No Final Output after {limit} iterations. Observations:\n");
    for a in actions {
        out.push_str(&format!("{}. {}: {}\n", a.iteration, a.agent, a.observation));
    }
    out.trim_end().to_string()
}

pub struct Executor<'a> {
    caller: Caller<'a>,
    templates: &'a TemplateSet,
    tools: &'a ToolRegistry,
    settings: ExecutionSettings,
    workspace: &'a mut Workspace,
    memory: MemoryStore,
}

impl<'a> Executor<'a> {
    pub(crate) fn new(
        caller: Caller<'a>,
        templates: &'a TemplateSet,
        tools: &'a ToolRegistry,
        settings: ExecutionSettings,
        workspace: &'a mut Workspace,
    ) -> Self {
        Self {
            caller,
            templates,
            tools,
            settings,
            workspace,
            memory: MemoryStore::new(),
        }
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn into_memory(self) -> MemoryStore {
        self.memory
    }

    /// Runs every plan step, returning the final step's output as the answer.
    pub fn run_execution(&mut self, team: &TeamDraft, task: &Task) -> Result<ExecutionReport, ExecutionError> {
        let report = validate_team(team, &self.tools.name_set());
        if !report.is_empty() {
            return Err(ExecutionError::InvalidTeam(report.render()));
        }
        let mut state = ExecutionState::new(team.plan.clone());
        while !state.plan.unfinished().is_empty() {
            let selection = self.select_next_step(&mut state, team, task)?;
            let step_index = state.plan.steps()[selection.position].index;
            let result = self.dispatch_step(&selection, step_index, team, task)?;
            if result.status == StepOutcome::Failed {
                state.outcome = ExecutionOutcome::Failed;
                state.results.push(result);
                self.caller.transition(
                    "execution-failed",
                    json!({"step": step_index, "cause": "refinement-failed"}),
                )?;
                return Err(ExecutionError::ExecutionFailed {
                    step_index,
                    cause: "refinement-failed: no Final Output within the refinement cap".into(),
                });
            }
            state.plan.set_status(selection.position, StepStatus::Done);
            state.results.push(result);
            state.history_digest = self
                .memory
                .long_term_digest(self.settings.memory_budget)
                .rendered;
        }
        state.outcome = ExecutionOutcome::Done;
        let last = state.plan.steps()[state.original_len - 1].index;
        let final_answer = state
            .result_for(last)
            .map(|r| r.final_output.clone())
            .unwrap_or_default();
        self.caller.transition(
            "execution-done",
            json!({"steps": state.results.len(), "synthesized": state.synthesized}),
        )?;
        Ok(ExecutionReport {
            final_answer,
            state,
        })
    }

    fn action_observer_prompt(&self, state: &ExecutionState, team: &TeamDraft, task: &Task) -> Result<String, PromptError> {
        let roles = team
            .roles()
            .map(|r| format!("- {}: {}", r.name, r.description))
            .collect::<Vec<_>>()
            .join("\n");
        let states = state
            .plan
            .unfinished()
            .into_iter()
            .map(|p| {
                let step = &state.plan.steps()[p];
                format!("{}. {}", step.index, step.render_line())
            })
            .collect::<Vec<_>>()
            .join("\n");
        self.templates.render(
            PromptKind::ActionObserver,
            &Bindings::new()
                .set("task", &task.text)
                .set("roles", roles)
                .set("history", &state.history_digest)
                .set("states", states)
                .set("format_example", format_example(PromptKind::ActionObserver, &[])),
        )
    }

    /// Asks the Action Observer for the next step and binds it to the plan.
    pub fn select_next_step(
        &mut self,
        state: &mut ExecutionState,
        team: &TeamDraft,
        task: &Task,
    ) -> Result<Selection, ExecutionError> {
        let prompt = self.action_observer_prompt(state, team, task)?;
        let members: Vec<String> = team.roles().map(|r| r.name.clone()).collect();
        let (choice, _) = self
            .caller
            .call_parsed(PromptKind::ActionObserver.label(), &prompt, |raw| {
                let choice = parse_next_step(raw).map_err(|e| e.to_string())?;
                if let Some(unknown) = choice.agent_names.iter().find(|n| team.role(n).is_none()) {
                    return Err(format!(
                        "no-agent-named: '{unknown}' is not one of the existing expert roles [{}]",
                        members.join(", ")
                    ));
                }
                Ok(choice)
            })
            .map_err(|e| match e {
                ExchangeError::Provider(p) => ExecutionError::Provider(p),
                other => ExecutionError::Selection(other.to_string()),
            })?;

        let (position, kind) = match match_step(&state.plan, &choice) {
            Some(p) => (p, SelectionKind::Matched),
            None if state.synthesized < self.settings.max_synthesized => {
                state.synthesized += 1;
                let p = state
                    .plan
                    .push_step(choice.agent_names.clone(), choice.step_text.clone());
                (p, SelectionKind::Synthesized)
            }
            None => (state.plan.unfinished()[0], SelectionKind::Fallback),
        };
        state.plan.set_status(position, StepStatus::InProgress);
        let step = &state.plan.steps()[position];
        let selection = Selection {
            position,
            agent_names: step.assigned_agents.clone(),
            step_text: step.render_line(),
            extracted_history: choice.relevant_history,
            kind,
        };
        self.caller.transition(
            "step-selected",
            json!({"step": step.index, "kind": kind, "agents": selection.agent_names}),
        )?;
        Ok(selection)
    }

    /// Routes a selection to self- or collaborative refinement and commits
    /// the result to memory.
    pub fn dispatch_step(
        &mut self,
        selection: &Selection,
        step_index: usize,
        team: &TeamDraft,
        task: &Task,
    ) -> Result<StepResult, ExecutionError> {
        let mut agents = Vec::new();
        for name in &selection.agent_names {
            let role = team
                .role(name)
                .ok_or_else(|| ExecutionError::UnknownAgent(name.clone()))?;
            agents.push(role.clone());
        }
        if agents.is_empty() {
            return Err(ExecutionError::UnknownAgent(String::new()));
        }
        let context = StepContext {
            task: &task.text,
            step_index,
            step_text: &selection.step_text,
            relevant_history: selection.extracted_history.as_deref(),
        };
        let result = if agents.len() == 1 {
            self.self_refine(&agents[0], &context)?
        } else {
            self.collaborative_refine(&agents, &context)?
        };
        if result.status != StepOutcome::Failed {
            for agent in &result.agents {
                self.memory
                    .append_summary(agent, step_index, &result.final_output);
            }
            self.memory.commit_long_term(&result)?;
        }
        self.caller.transition(
            "step-done",
            json!({"step": step_index, "status": result.status, "actions": result.actions.len()}),
        )?;
        Ok(result)
    }

    fn agent_prompt(
        &self,
        agent: &AgentSpec,
        context: &StepContext<'_>,
        completed: &[RefinementAction],
        permitted: &[String],
    ) -> Result<String, PromptError> {
        let bundle = self
            .memory
            .assemble_dynamic_context(&agent.name, self.settings.memory_budget);
        let mut previous = bundle.rendered;
        if let Some(history) = context.relevant_history {
            previous.push_str(&format!("Relevant history:\n{history}\n"));
        }
        let completed_steps: String = completed.iter().map(RefinementAction::render).collect();
        self.templates.render(
            PromptKind::CustomAgent,
            &Bindings::new()
                .set("role", &agent.prompt)
                .set(
                    "context",
                    format!(
                        "{}\n\nThis step is part of the overall task: {}",
                        context.step_text, context.task
                    ),
                )
                .set("suggestions", &agent.suggestions)
                .set("previous", previous)
                .set("completed_steps", completed_steps)
                .set("tool", permitted.join(", "))
                .set("format_example", format_example(PromptKind::CustomAgent, permitted)),
        )
    }

    /// One agent turn: prompt, parse, run the tool. Parse failures and tool
    /// errors become the observation.
    fn turn(
        &mut self,
        agent: &AgentSpec,
        context: &StepContext<'_>,
        completed: &[RefinementAction],
        iteration: u32,
    ) -> Result<(RefinementAction, bool), ExecutionError> {
        let permitted = self.tools.permitted(&agent.toolset);
        let prompt = self.agent_prompt(agent, context, completed, &permitted)?;
        let tag = PromptKind::CustomAgent.label();
        let reply = self.caller.call(tag, &prompt)?;
        let thought = parse_thought(&reply);
        let (action, terminal) = match parse_agent_action(&reply) {
            Err(err) => {
                self.caller.note(
                    EventKind::Parse,
                    json!({"tag": tag, "agent": agent.name, "ok": false, "error": err.to_string()}),
                )?;
                let action = RefinementAction {
                    iteration,
                    agent: agent.name.clone(),
                    thought,
                    plan: String::new(),
                    tool_used: String::new(),
                    action_input: String::new(),
                    observation: err.to_string(),
                };
                (action, false)
            }
            Ok(parsed) => {
                self.caller.note(
                    EventKind::Parse,
                    json!({"tag": tag, "agent": agent.name, "ok": true, "action": parsed.action}),
                )?;
                let call = self.tools.execute_permitted(
                    &parsed.action,
                    &parsed.action_input,
                    self.workspace,
                    Some(&permitted),
                );
                self.caller.note(
                    EventKind::Tool,
                    json!({
                        "step": context.step_index,
                        "agent": agent.name,
                        "tool": call.tool,
                        "terminal": call.terminal,
                        "error": call.error,
                        "observation": call.observation,
                    }),
                )?;
                let action = RefinementAction {
                    iteration,
                    agent: agent.name.clone(),
                    thought,
                    plan: parsed.current_step,
                    tool_used: call.tool,
                    action_input: parsed.action_input,
                    observation: call.observation,
                };
                (action, call.terminal)
            }
        };
        self.memory
            .append_short_term(&agent.name, context.step_index, &action);
        Ok((action, terminal))
    }

    fn finish(
        &self,
        agents: Vec<String>,
        context: &StepContext<'_>,
        actions: Vec<RefinementAction>,
        terminal: bool,
        limit: u32,
    ) -> StepResult {
        let (status, final_output) = if terminal {
            let last = actions.last().expect("terminal turn recorded");
            (StepOutcome::Completed, last.observation.clone())
        } else if self.settings.forced_final {
            (StepOutcome::ForcedFinal, digest(&actions, limit))
        } else {
            (StepOutcome::Failed, String::new())
        };
        StepResult {
            step_index: context.step_index,
            step_text: context.step_text.to_string(),
            agents,
            actions,
            final_output,
            status,
        }
    }

    /// Bounded thought / action / observation loop for a single agent.
    pub fn self_refine(&mut self, agent: &AgentSpec, context: &StepContext<'_>) -> Result<StepResult, ExecutionError> {
        let cap = self.settings.refinement_cap.max(1);
        let mut actions: Vec<RefinementAction> = Vec::new();
        let mut terminal = false;
        for iteration in 1..=cap {
            let (action, is_final) = self.turn(agent, context, &actions, iteration)?;
            actions.push(action);
            if is_final {
                terminal = true;
                break;
            }
        }
        Ok(self.finish(vec![agent.name.clone()], context, actions, terminal, cap))
    }

    /// Fixed-order turn-taking until some agent emits Final Output or the
    /// round cap is reached. Every turn sees all earlier utterances.
    pub fn collaborative_refine(
        &mut self,
        agents: &[AgentSpec],
        context: &StepContext<'_>,
    ) -> Result<StepResult, ExecutionError> {
        let rounds = self.settings.collab_rounds.max(1);
        let mut actions: Vec<RefinementAction> = Vec::new();
        let mut terminal = false;
        'rounds: for round in 1..=rounds {
            for agent in agents {
                let (action, is_final) = self.turn(agent, context, &actions, round)?;
                actions.push(action);
                if is_final {
                    terminal = true;
                    break 'rounds;
                }
            }
        }
        let names = agents.iter().map(|a| a.name.clone()).collect();
        Ok(self.finish(names, context, actions, terminal, rounds))
    }
}

/// True when `action` ended a loop.
pub fn is_final_action(action: &RefinementAction) -> bool {
    crate::schema::tool_key(&action.tool_used) == crate::schema::tool_key(FINAL_OUTPUT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::NextStepParse;
    use crate::schema::PlanStep;

    fn plan() -> ExecutionPlan {
        ExecutionPlan::new(vec![
            PlanStep::new(1, &["Researcher"], "Collect the facts."),
            PlanStep::new(2, &["Writer", "Editor"], "Draft the story."),
            PlanStep::new(3, &["Language Expert"], "Based on the previous steps, answer."),
        ])
    }

    fn choice(agents: &[&str], text: &str, hint: Option<usize>) -> NextStepParse {
        NextStepParse {
            agent_names: agents.iter().map(|s| s.to_string()).collect(),
            step_text: text.into(),
            index_hint: hint,
            relevant_history: None,
        }
    }

    fn act(iteration: u32, tool: &str, input: &str, observation: &str) -> RefinementAction {
        RefinementAction {
            iteration,
            agent: "A".into(),
            thought: "t".into(),
            plan: "p".into(),
            tool_used: tool.into(),
            action_input: input.into(),
            observation: observation.into(),
        }
    }

    #[test]
    fn matches_on_collapsed_text_case_insensitively() {
        let p = plan();
        assert_eq!(match_step(&p, &choice(&["researcher"], "collect   the FACTS.", None)), Some(0));
        assert_eq!(match_step(&p, &choice(&["Writer", "Editor"], "Draft the story.", None)), Some(1));
    }

    #[test]
    fn falls_back_to_index_and_agents() {
        let p = plan();
        let c = choice(&["Writer", "Editor"], "Write a draft of the story", Some(2));
        assert_eq!(match_step(&p, &c), Some(1));
        let wrong_agents = choice(&["Writer"], "Write a draft of the story", Some(2));
        assert_eq!(match_step(&p, &wrong_agents), None);
    }

    #[test]
    fn finished_steps_never_match() {
        let mut p = plan();
        p.set_status(0, StepStatus::Done);
        assert_eq!(match_step(&p, &choice(&["Researcher"], "Collect the facts.", Some(1))), None);
    }

    #[test]
    fn digest_lists_every_observation() {
        let actions = vec![act(1, "Ponder", "", "first"), act(2, "Ponder", "", "second")];
        let d = digest(&actions, 5);
        assert!(d.starts_with("No Final Output after 5 iterations."));
        assert!(d.contains("1. A: first") && d.contains("2. A: second"));
    }

    #[test]
    fn render_hides_file_bodies() {
        let write = act(1, WRITE_FILE, ">>>a<<<\n>>>>>\nsecret body\n<<<<<", "wrote a (11 bytes)");
        assert!(!write.render().contains("secret body"));
        let other = act(1, "Final Output", "the answer", "the answer");
        assert!(other.render().contains("ActionInput: the answer"));
    }

    #[test]
    fn final_action_detection_ignores_case() {
        assert!(is_final_action(&act(1, "final output", "", "")));
        assert!(!is_final_action(&act(1, "Write File", "", "")));
    }

    #[test]
    fn default_settings_match_protocol() {
        let s = ExecutionSettings::default();
        assert_eq!((s.refinement_cap, s.collab_rounds, s.max_synthesized), (5, 5, 2));
        assert!(s.forced_final);
    }
}
