//! Multi-agent orchestration engine.
//!
//! A Planner drafts a team of expert roles and an execution plan, two
//! observers critique the draft until both approve (or a round cap is hit),
//! then an Action Observer dispatches plan steps to the generated agents,
//! which work through bounded self-refinement or turn-taking collaborative
//! refinement. All model traffic goes through a traced client so any run can
//! be replayed deterministically.

pub mod config;
pub mod drafting;
pub mod engine;
pub mod eval;
mod exchange;
pub mod execution;
pub mod memory;
pub mod prompt;
pub mod provider;
pub mod schema;
pub mod toolkit;
pub mod trace;

pub use config::{BackendKind, RunConfig};
pub use exchange::{reprompt_text, CallSettings, ExchangeError};
pub use engine::{Engine, EngineError, RunOutcome};
pub use schema::{
    AgentSpec, Critique, ExecutionPlan, PlanStep, RoleOrigin, StepStatus, Task, TeamDraft,
    ValidationReport, Verdict, Violation, ViolationCode,
};
