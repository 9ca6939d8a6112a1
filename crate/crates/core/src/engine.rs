//! End-to-end runs: drafting, then execution, all traced.

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::drafting::{Drafter, DraftingError, DraftingResult};
use crate::exchange::Caller;
use crate::execution::{ExecutionError, ExecutionReport, Executor};
use crate::memory::MemoryStore;
use crate::prompt::TemplateSet;
use crate::provider::Client;
use crate::schema::Task;
use crate::toolkit::{ToolRegistry, Workspace};
use crate::trace::{Phase, TraceError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Drafting(#[from] DraftingError),
    #[error(transparent)]
    Execution(#[from] ExecutionError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Config(_) => "config",
            EngineError::Drafting(e) => e.code(),
            EngineError::Execution(e) => e.code(),
            EngineError::Trace(_) => "trace-io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub final_answer: String,
    pub drafting: DraftingResult,
    pub execution: ExecutionReport,
    pub memory: MemoryStore,
    pub files_written: Vec<String>,
}

pub struct Engine {
    client: Client,
    config: RunConfig,
    templates: TemplateSet,
    tools: ToolRegistry,
    role_library: String,
}

impl Engine {
    pub fn new(client: Client, config: RunConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            client,
            config,
            templates: TemplateSet::builtin(),
            tools: ToolRegistry::default(),
            role_library: String::new(),
        })
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_tools(mut self, tools: ToolRegistry) -> Self {
        self.tools = tools;
        self
    }

    /// Text bound to `{existing_roles}`; empty means none.
    pub fn with_role_library(mut self, roles: impl Into<String>) -> Self {
        self.role_library = roles.into();
        self
    }

    pub fn client(&self) -> &Client {
        &self.client
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn tools(&self) -> &ToolRegistry {
        &self.tools
    }

    fn caller(&self) -> Caller<'_> {
        Caller::new(&self.client, self.config.call_settings())
    }

    fn set_phase(&self, phase: Phase) {
        if let Some(t) = self.client.tracer() {
            t.set_phase(phase);
        }
    }

    pub fn drafter(&self) -> Drafter<'_> {
        Drafter::new(
            self.caller(),
            &self.templates,
            &self.tools,
            self.config.drafting_rounds,
            &self.role_library,
        )
    }

    pub fn executor<'a>(&'a self, workspace: &'a mut Workspace) -> Executor<'a> {
        Executor::new(
            self.caller(),
            &self.templates,
            &self.tools,
            self.config.execution_settings(),
            workspace,
        )
    }

    /// Drafts a team for `task` and executes its plan in `workspace`.
    pub fn run(&self, task: &Task, workspace: &mut Workspace) -> Result<RunOutcome, EngineError> {
        let caller = self.caller();
        self.set_phase(Phase::Drafting);
        caller.transition(
            "run-start",
            json!({"task": task.text, "task_id": task.id, "config": self.config.protocol_record()}),
        )?;
        let result = self.run_inner(task, workspace);
        match &result {
            Ok(outcome) => caller.transition(
                "run-end",
                json!({
                    "status": "done",
                    "final_answer": outcome.final_answer,
                    "files_written": outcome.files_written,
                }),
            )?,
            Err(err) => caller.transition(
                "run-end",
                json!({
                    "status": "failed",
                    "error": err.code(),
                    "message": err.to_string(),
                    "files_written": workspace.files_written(),
                }),
            )?,
        }
        result
    }

    fn run_inner(&self, task: &Task, workspace: &mut Workspace) -> Result<RunOutcome, EngineError> {
        let drafting = self.drafter().run(task)?;
        self.set_phase(Phase::Execution);
        let mut executor = self.executor(workspace);
        let execution = executor.run_execution(&drafting.team, task)?;
        let memory = executor.into_memory();
        Ok(RunOutcome {
            final_answer: execution.final_answer.clone(),
            drafting,
            execution,
            memory,
            files_written: workspace.files_written().to_vec(),
        })
    }
}
