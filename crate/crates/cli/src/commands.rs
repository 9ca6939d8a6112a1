use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use teamsmith_core::eval::{load_benchmark, run_benchmark, BenchmarkReport};
use teamsmith_core::schema::validate_team;
use teamsmith_core::toolkit::{ToolRegistry, Workspace};
use teamsmith_core::trace::{
    first_difference, load_run, replay_backend, verify_events, EventKind, Phase, TraceEvent,
    TraceRecorder, TraceStats, Tracer,
};
use teamsmith_core::{BackendKind, RunConfig, Task, TeamDraft};

use crate::args::{EvalArgs, ReplayArgs, RunArgs, TraceArgs, ValidateArgs};
use crate::error::CliError;
use crate::settings;

/// Written into the workspace after `run`.
pub const MANIFEST: &str = ".teamsmith-manifest.json";

fn open_workspace(path: &Path) -> Result<Workspace, CliError> {
    Workspace::open(path).map_err(|e| CliError::Failed(format!("workspace {}: {e}", path.display())))
}

fn file_tracer(path: &Path) -> Result<Tracer, CliError> {
    Ok(Tracer::new(TraceRecorder::create(path)?))
}

pub fn run(args: RunArgs) -> Result<(), CliError> {
    let config = settings::resolve(&args.engine)?;
    let text = match (&args.task, &args.task_file) {
        (Some(t), _) => t.clone(),
        (None, Some(path)) => std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        (None, None) => return Err(CliError::Usage("one of --task or --task-file is required".into())),
    };
    let task = Task::new("run", text).ok_or_else(|| CliError::Usage("task text is empty".into()))?;
    let backend = settings::backend(&config)?;
    let tracer = file_tracer(&config.trace)?;
    let engine = settings::engine(&config, backend, &tracer)?;
    let mut workspace = open_workspace(&config.workspace)?;
    let outcome = engine
        .run(&task, &mut workspace)
        .map_err(|source| CliError::Engine {
            source,
            trace: config.trace.clone(),
        })?;
    let manifest = json!({
        "task": task.text,
        "trace": config.trace,
        "files_written": outcome.files_written,
        "drafting": {"outcome": outcome.drafting.outcome, "rounds": outcome.drafting.rounds},
        "steps": outcome.execution.state.results.iter().map(|r| json!({
            "step": r.step_index,
            "agents": r.agents,
            "status": r.status,
        })).collect::<Vec<_>>(),
    });
    let manifest_path = workspace.root().join(MANIFEST);
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap() + "\n")
        .map_err(|e| CliError::io(&manifest_path, e))?;
    println!("{}", outcome.final_answer);
    Ok(())
}

fn transition<'a>(events: &'a [TraceEvent], name: &str) -> Option<&'a Value> {
    events
        .iter()
        .find(|e| e.kind == EventKind::Transition && e.payload["event"] == name)
        .map(|e| &e.payload)
}

pub fn replay(args: ReplayArgs) -> Result<(), CliError> {
    let recorded = load_run(&args.trace)?;
    let start = transition(&recorded, "run-start")
        .ok_or_else(|| CliError::Failed(format!("{}: no run-start event", args.trace.display())))?;
    let mut config = RunConfig {
        backend: BackendKind::Replay,
        retry_attempts: 1,
        ..RunConfig::default()
    };
    config.apply_protocol_record(&start["config"])?;
    let text = start["task"].as_str().unwrap_or_default();
    let id = start["task_id"].as_str().unwrap_or("run");
    let task = Task::new(id, text)
        .ok_or_else(|| CliError::Failed("recorded task text is empty".into()))?;

    let scratch;
    let root: PathBuf = match &args.workspace {
        Some(p) => {
            let fresh = std::fs::read_dir(p).map(|mut d| d.next().is_none()).unwrap_or(true);
            if !fresh {
                return Err(CliError::Usage(format!(
                    "replay workspace {} must be empty or absent",
                    p.display()
                )));
            }
            p.clone()
        }
        None => {
            scratch = tempfile::tempdir().map_err(|e| CliError::io(std::env::temp_dir(), e))?;
            scratch.path().to_path_buf()
        }
    };
    let tracer = match &args.out {
        Some(p) => file_tracer(p)?,
        None => Tracer::in_memory(),
    };
    let engine = settings::engine(&config, std::sync::Arc::new(replay_backend(&recorded)), &tracer)?;
    let mut workspace = open_workspace(&root)?;
    let result = engine.run(&task, &mut workspace);
    let replayed = tracer.snapshot();

    let recorded_answer = transition(&recorded, "run-end").and_then(|e| e["final_answer"].as_str());
    let replayed_answer = result.as_ref().ok().map(|o| o.final_answer.as_str());
    let difference = first_difference(&recorded, &replayed);
    let identical = difference.is_none() && recorded_answer == replayed_answer;
    println!("identical: {identical}");
    if let Some(seq) = difference {
        println!("first difference at seq {seq}");
    }
    if let Err(err) = &result {
        eprintln!("replayed run ended with: {err}");
    }
    if identical {
        Ok(())
    } else {
        Err(CliError::Failed("replay differs from the recorded run".into()))
    }
}

fn numbered(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("jsonl");
    path.with_file_name(format!("{stem}-{i}.{ext}"))
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let config = settings::resolve(&args.engine)?;
    let mut tasks = load_benchmark(&args.benchmark)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(n) = args.n {
        tasks.retain(|t| t.n() == n);
    }
    if tasks.is_empty() {
        return Err(CliError::Usage("no benchmark tasks to evaluate".into()));
    }
    let baseline = match &args.baseline {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Some(BenchmarkReport {
                method: value["method"].as_str().unwrap_or("baseline").to_string(),
                tasks: vec![],
                mean_score: value["mean_score"].as_f64().unwrap_or(0.0),
                question_level_score: value["question_level_score"].as_f64().unwrap_or(0.0),
            })
        }
        None => None,
    };
    // one backend for the whole benchmark so a script is consumed in order
    let backend = settings::backend(&config)?;
    let report = run_benchmark(&args.method, &tasks, |i, task| -> Result<String, CliError> {
        let trace = numbered(&config.trace, i + 1);
        let tracer = file_tracer(&trace)?;
        let engine = settings::engine(&config, backend.clone(), &tracer)?;
        let mut workspace = open_workspace(&config.workspace.join(format!("task-{}", i + 1)))?;
        let task = Task::new(format!("task-{}", i + 1), task.prompt())
            .ok_or_else(|| CliError::Failed("empty task".into()))?;
        engine
            .run(&task, &mut workspace)
            .map(|o| o.final_answer)
            .map_err(|source| CliError::Engine { source, trace })
    });
    let json = serde_json::to_string_pretty(&report).unwrap();
    if let Some(path) = &args.report {
        std::fs::write(path, json.clone() + "\n").map_err(|e| CliError::io(path, e))?;
    }
    println!("{json}");
    println!();
    print!("{}", report.table(baseline.as_ref()));
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.draft).map_err(|e| CliError::io(&args.draft, e))?;
    let draft = TeamDraft::from_json(&text)
        .map_err(|e| CliError::Failed(format!("{}: not a team draft: {e}", args.draft.display())))?;
    let report = validate_team(&draft, &ToolRegistry::default().name_set());
    if report.is_empty() {
        println!("ok: {} roles, {} steps", draft.roles().count(), draft.plan.len());
        Ok(())
    } else {
        println!("{}", report.render());
        Err(CliError::Failed(format!("{} violation(s)", report.violations.len())))
    }
}

pub fn trace(args: TraceArgs) -> Result<(), CliError> {
    let events = load_run(&args.path)?;
    verify_events(&events)?;
    let stats = TraceStats::of(&events);
    if args.stats {
        println!("model calls:");
        for phase in [Phase::Drafting, Phase::Execution, Phase::Eval] {
            let n = stats.model_calls(phase);
            if n > 0 {
                println!("  {:<11} {n}", serde_json::to_value(phase).unwrap().as_str().unwrap_or("?"));
            }
        }
        print!("{}", stats.render());
    } else {
        let end = transition(&events, "run-end");
        println!("{} events", events.len());
        if let Some(end) = end {
            println!("status: {}", end["status"].as_str().unwrap_or("?"));
        }
    }
    Ok(())
}
