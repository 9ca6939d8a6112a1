//! Run configuration with protocol defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::drafting::DEFAULT_ROUND_CAP;
use crate::exchange::CallSettings;
use crate::execution::{
    ExecutionSettings, DEFAULT_COLLAB_ROUNDS, DEFAULT_MAX_SYNTHESIZED, DEFAULT_REFINEMENT_CAP,
};
use crate::memory::DEFAULT_BUDGET;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Http,
    Scripted,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub model: String,
    pub base_url: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub drafting_rounds: u32,
    pub refinement_cap: u32,
    pub collab_rounds: u32,
    pub reprompt_budget: u32,
    pub forced_final: bool,
    pub max_synthesized_steps: usize,
    /// Estimated tokens for dynamic memory bundles.
    pub budget: usize,
    pub retry_attempts: u32,
    pub timeout_secs: u64,
    pub workspace: PathBuf,
    pub trace: PathBuf,
    pub role_library: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub script: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Http,
            model: crate::provider::HttpConfig::default().model,
            base_url: crate::provider::HttpConfig::default().base_url,
            temperature: 0.0,
            max_tokens: None,
            drafting_rounds: DEFAULT_ROUND_CAP,
            refinement_cap: DEFAULT_REFINEMENT_CAP,
            collab_rounds: DEFAULT_COLLAB_ROUNDS,
            reprompt_budget: 2,
            forced_final: true,
            max_synthesized_steps: DEFAULT_MAX_SYNTHESIZED,
            budget: DEFAULT_BUDGET,
            retry_attempts: 3,
            timeout_secs: 120,
            workspace: PathBuf::from("workspace"),
            trace: PathBuf::from("trace.jsonl"),
            role_library: None,
            templates: None,
            script: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let caps = [
            ("drafting_rounds", self.drafting_rounds),
            ("refinement_cap", self.refinement_cap),
            ("collab_rounds", self.collab_rounds),
            ("retry_attempts", self.retry_attempts),
        ];
        for (name, value) in caps {
            if value < 1 {
                return Err(ConfigError(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(ConfigError("temperature must be within [0, 1]".into()));
        }
        if self.budget == 0 {
            return Err(ConfigError("budget must be positive".into()));
        }
        if self.max_tokens == Some(0) {
            return Err(ConfigError("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn call_settings(&self) -> CallSettings {
        CallSettings {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            reprompt_budget: self.reprompt_budget,
        }
    }

    pub fn execution_settings(&self) -> ExecutionSettings {
        ExecutionSettings {
            refinement_cap: self.refinement_cap,
            collab_rounds: self.collab_rounds,
            forced_final: self.forced_final,
            max_synthesized: self.max_synthesized_steps,
            memory_budget: self.budget,
        }
    }

    /// Settings that shape the protocol, as recorded at run start. Backend
    /// choice and file locations are left out so a replay of a run records
    /// the same event.
    pub fn protocol_record(&self) -> Value {
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "drafting_rounds": self.drafting_rounds,
            "refinement_cap": self.refinement_cap,
            "collab_rounds": self.collab_rounds,
            "reprompt_budget": self.reprompt_budget,
            "forced_final": self.forced_final,
            "max_synthesized_steps": self.max_synthesized_steps,
            "budget": self.budget,
        })
    }

    /// Applies a recorded [`Self::protocol_record`] over this config.
    pub fn apply_protocol_record(&mut self, record: &Value) -> Result<(), ConfigError> {
        let mut merged = serde_json::to_value(&*self).map_err(|e| ConfigError(e.to_string()))?;
        if let (Value::Object(target), Value::Object(source)) = (&mut merged, record) {
            for (k, v) in source {
                if target.contains_key(k) {
                    target.insert(k.clone(), v.clone());
                }
            }
        }
        *self = serde_json::from_value(merged).map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_protocol_constants() {
        let c = RunConfig::default();
        assert_eq!(c.temperature, 0.0);
        assert_eq!(c.drafting_rounds, 3);
        assert_eq!(c.refinement_cap, 5);
        assert_eq!(c.collab_rounds, 5);
        assert_eq!(c.budget, 6000);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_zero_caps() {
        let c = RunConfig {
            refinement_cap: 0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn protocol_record_round_trips() {
        let recorded = RunConfig {
            refinement_cap: 2,
            model: "m".into(),
            ..RunConfig::default()
        };
        let mut fresh = RunConfig {
            backend: BackendKind::Replay,
            ..RunConfig::default()
        };
        fresh.apply_protocol_record(&recorded.protocol_record()).unwrap();
        assert_eq!(fresh.refinement_cap, 2);
        assert_eq!(fresh.model, "m");
        assert_eq!(fresh.backend, BackendKind::Replay);
    }
}
