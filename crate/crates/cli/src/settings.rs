//! Config layering: flags over file over defaults.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use teamsmith_core::prompt::TemplateSet;
use teamsmith_core::provider::{
    Client, HttpBackend, HttpConfig, LlmBackend, RetryPolicy, ScriptedBackend,
};
use teamsmith_core::trace::{load_run, replay_backend, Tracer};
use teamsmith_core::{BackendKind, Engine, RunConfig};

use crate::args::{BackendArg, EngineArgs};
use crate::error::CliError;

pub fn load_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Resolves the effective config for `args`.
pub fn resolve(args: &EngineArgs) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => load_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(b) = args.backend {
        config.backend = match b {
            BackendArg::Http => BackendKind::Http,
            BackendArg::Scripted => BackendKind::Scripted,
            BackendArg::Replay => BackendKind::Replay,
        };
    }
    macro_rules! overlay {
        ($($field:ident),*) => {$(
            if let Some(v) = &args.$field {
                config.$field = v.clone().into();
            }
        )*};
    }
    overlay!(
        model, base_url, temperature, drafting_rounds, refinement_cap, collab_rounds,
        reprompt_budget, max_synthesized_steps, budget, retry_attempts, timeout_secs,
        workspace, trace
    );
    if args.max_tokens.is_some() {
        config.max_tokens = args.max_tokens;
    }
    if args.script.is_some() {
        config.script = args.script.clone();
    }
    if args.role_library.is_some() {
        config.role_library = args.role_library.clone();
    }
    if args.templates.is_some() {
        config.templates = args.templates.clone();
    }
    if args.no_forced_final {
        config.forced_final = false;
    }
    config.validate()?;
    Ok(config)
}

pub fn backend(config: &RunConfig) -> Result<Arc<dyn LlmBackend>, CliError> {
    let script = || {
        config
            .script
            .clone()
            .ok_or_else(|| CliError::Usage("--script is required for this backend".into()))
    };
    Ok(match config.backend {
        BackendKind::Http => {
            let http = HttpConfig {
                base_url: config.base_url.clone(),
                model: config.model.clone(),
                api_key: None,
                timeout: Duration::from_secs(config.timeout_secs),
            }
            .with_env_key();
            Arc::new(HttpBackend::new(http)?)
        }
        BackendKind::Scripted => Arc::new(ScriptedBackend::from_jsonl(script()?)?),
        BackendKind::Replay => Arc::new(replay_backend(&load_run(script()?)?)),
    })
}

pub fn retry(config: &RunConfig) -> RetryPolicy {
    match config.backend {
        BackendKind::Http => RetryPolicy::exponential(config.retry_attempts, Duration::from_secs(1)),
        _ => RetryPolicy::immediate(config.retry_attempts),
    }
}

/// An engine over `backend`, tracing into `tracer`, with any template and
/// role-library overrides from `config`.
pub fn engine(
    config: &RunConfig,
    backend: Arc<dyn LlmBackend>,
    tracer: &Tracer,
) -> Result<Engine, CliError> {
    let client = Client::new(backend)
        .with_retry(retry(config))
        .with_tracer(tracer.clone());
    let mut engine = Engine::new(client, config.clone())?;
    if let Some(dir) = &config.templates {
        let templates = TemplateSet::with_overrides(dir)
            .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        engine = engine.with_templates(templates);
    }
    if let Some(path) = &config.role_library {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        engine = engine.with_role_library(text);
    }
    Ok(engine)
}
