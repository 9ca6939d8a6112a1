//! Model calls with bounded reprompting and parse tracing.

use serde_json::{json, Value};
use thiserror::Error;

use crate::provider::{Client, CompletionRequest, ProviderError};
use crate::trace::{EventKind, TraceError};

#[derive(Debug, Error)]
pub enum ExchangeError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("reprompt budget exhausted for {tag} after {attempts} attempts: {last_error}")]
    Exhausted {
        tag: String,
        attempts: u32,
        last_error: String,
    },
}

impl From<TraceError> for ExchangeError {
    fn from(err: TraceError) -> Self {
        ExchangeError::Provider(ProviderError::Trace(err))
    }
}

/// Request settings shared by every call in a run.
#[derive(Debug, Clone, Copy)]
pub struct CallSettings {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub reprompt_budget: u32,
}

impl Default for CallSettings {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: None,
            reprompt_budget: 2,
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Caller<'a> {
    pub client: &'a Client,
    pub settings: CallSettings,
}

/// The deterministic correction appended to a prompt after a rejected reply.
pub fn reprompt_text(prompt: &str, error: &str) -> String {
    format!(
        "{prompt}\n\n# Correction\nYour previous reply could not be accepted:\n{error}\nReply again, following the format example exactly."
    )
}

impl<'a> Caller<'a> {
    pub fn new(client: &'a Client, settings: CallSettings) -> Self {
        Self { client, settings }
    }

    pub fn call(&self, tag: &str, prompt: &str) -> Result<String, ProviderError> {
        let request = CompletionRequest::new(tag, prompt)
            .with_temperature(self.settings.temperature)
            .with_max_tokens(self.settings.max_tokens);
        Ok(self.client.complete(&request)?.text)
    }

    pub fn note(&self, kind: EventKind, payload: Value) -> Result<(), TraceError> {
        match self.client.tracer() {
            Some(tracer) => tracer.record(kind, payload),
            None => Ok(()),
        }
    }

    pub fn transition(&self, event: &str, detail: Value) -> Result<(), TraceError> {
        match self.client.tracer() {
            Some(tracer) => tracer.transition(event, detail),
            None => Ok(()),
        }
    }

    /// Calls, parses, and reprompts with the parse error appended until the
    /// reply parses or the budget runs out. Returns the value and raw reply.
    pub fn call_parsed<T>(
        &self,
        tag: &str,
        prompt: &str,
        mut parse: impl FnMut(&str) -> Result<T, String>,
    ) -> Result<(T, String), ExchangeError> {
        let attempts = 1 + self.settings.reprompt_budget;
        let mut current = prompt.to_string();
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let reply = self.call(tag, &current)?;
            match parse(&reply) {
                Ok(value) => {
                    self.note(
                        EventKind::Parse,
                        json!({"tag": tag, "attempt": attempt, "ok": true}),
                    )?;
                    return Ok((value, reply));
                }
                Err(error) => {
                    self.note(
                        EventKind::Parse,
                        json!({"tag": tag, "attempt": attempt, "ok": false, "error": error}),
                    )?;
                    current = reprompt_text(prompt, &error);
                    last_error = error;
                }
            }
        }
        Err(ExchangeError::Exhausted {
            tag: tag.to_string(),
            attempts,
            last_error,
        })
    }
}
