use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "teamsmith", version, about = "Draft an expert team for a task and execute its plan")]
pub struct Cli {
    /// Log filter, e.g. `info` or `teamsmith_core=debug`. Logs go to stderr.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a task end to end and print the final answer.
    Run(RunArgs),
    /// Re-execute a recorded run from its trace and compare.
    Replay(ReplayArgs),
    /// Score a trivia benchmark file.
    Eval(EvalArgs),
    /// Lint a serialized team draft.
    Validate(ValidateArgs),
    /// Inspect a trace file.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Http,
    Scripted,
    Replay,
}

/// Settings shared by commands that run the engine. Every flag overrides
/// the config file, which overrides the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct EngineArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Script (JSON Lines) for the scripted backend, or a trace for replay.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub drafting_rounds: Option<u32>,
    #[arg(long)]
    pub refinement_cap: Option<u32>,
    #[arg(long)]
    pub collab_rounds: Option<u32>,
    #[arg(long)]
    pub reprompt_budget: Option<u32>,
    /// Fail a step that exhausts its refinement cap instead of summarizing it.
    #[arg(long)]
    pub no_forced_final: bool,
    #[arg(long)]
    pub max_synthesized_steps: Option<usize>,
    /// Dynamic-memory budget in estimated tokens.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub retry_attempts: Option<u32>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub workspace: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Text file describing existing roles the planner may select from.
    #[arg(long)]
    pub role_library: Option<PathBuf>,
    /// Directory of template overrides.
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, conflicts_with = "task_file", required_unless_present = "task_file")]
    pub task: Option<String>,
    #[arg(long)]
    pub task_file: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Trace recorded by `run`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Workspace for the re-execution; a fresh temporary directory if omitted.
    #[arg(long)]
    pub workspace: Option<PathBuf>,
    /// Where to write the replay's own trace; kept in memory if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Benchmark file: JSON Lines of {topic, questions: [{text, answer_variants}]}.
    #[arg(long)]
    pub benchmark: PathBuf,
    /// Only evaluate tasks with this many questions.
    #[arg(long)]
    pub n: Option<usize>,
    /// Method name shown in the report.
    #[arg(long, default_value = "teamsmith")]
    pub method: String,
    /// A previous JSON report to compare against.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Team draft as JSON.
    #[arg(long)]
    pub draft: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    pub path: PathBuf,
    /// Print event and model-call counts per phase.
    #[arg(long)]
    pub stats: bool,
}
