//! Text completion backends.
//!
//! The engine talks to a [`Client`], which wraps any [`LlmBackend`] with the
//! retry policy and, when attached, writes a prompt event and a
//! completion-or-error event to the run trace for every call.

mod fingerprint;
mod http;
mod retry;
mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::trace::{EventKind, TraceError, Tracer};

pub use fingerprint::{Fingerprint, FingerprintField};
pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use retry::{with_retry, RetryPolicy};
pub use scripted::{ScriptEntry, ScriptedBackend};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("backend-rejection: HTTP {status}: {body}")]
    BackendRejection { status: u16, body: String },
    #[error("script-exhausted: no scripted response for call {call}")]
    ScriptExhausted { call: usize },
    #[error("replay-divergence: call {call} differs in {field}")]
    ReplayDivergence { call: usize, field: FingerprintField },
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transport(_))
    }

    /// Short stable label used in traces.
    pub fn class(&self) -> &'static str {
        match self {
            ProviderError::Transport(_) => "transport",
            ProviderError::BackendRejection { .. } => "backend-rejection",
            ProviderError::ScriptExhausted { .. } => "script-exhausted",
            ProviderError::ReplayDivergence { .. } => "replay-divergence",
            ProviderError::InvalidScript(_) => "invalid-script",
            ProviderError::Trace(_) => "trace-io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub tag: String,
}

impl CompletionRequest {
    /// A user-message-only request at temperature 0.
    pub fn new(tag: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            system_text: String::new(),
            user_text: user_text.into(),
            temperature: 0.0,
            max_tokens: None,
            tag: tag.into(),
        }
    }

    /// Overrides the temperature, clamped to `[0, 1]`.
    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = if temperature.is_nan() {
            0.0
        } else {
            temperature.clamp(0.0, 1.0)
        };
        self
    }

    pub fn with_system(mut self, system_text: impl Into<String>) -> Self {
        self.system_text = system_text.into();
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: Option<u32>) -> Self {
        self.max_tokens = max_tokens.filter(|&n| n > 0);
        self
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint::of(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub usage: Option<Usage>,
    pub backend_id: String,
}

/// A model backend. Implementations must tolerate concurrent calls.
pub trait LlmBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for Arc<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        (**self).complete(request)
    }
}

/// Engine-facing handle: backend plus retry plus optional tracing.
#[derive(Clone)]
pub struct Client {
    backend: Arc<dyn LlmBackend>,
    retry: RetryPolicy,
    tracer: Option<Tracer>,
}

impl std::fmt::Debug for Client {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Client")
            .field("backend", &self.backend.id())
            .field("retry", &self.retry)
            .field("traced", &self.tracer.is_some())
            .finish()
    }
}

impl Client {
    pub fn new(backend: Arc<dyn LlmBackend>) -> Self {
        Self {
            backend,
            retry: RetryPolicy::default(),
            tracer: None,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_tracer(mut self, tracer: Tracer) -> Self {
        self.tracer = Some(tracer);
        self
    }

    pub fn tracer(&self) -> Option<&Tracer> {
        self.tracer.as_ref()
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Returns the backend's text verbatim. Emits exactly one prompt event
    /// and one completion or error event when a tracer is attached.
    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let fingerprint = request.fingerprint().to_string();
        let correlation = match &self.tracer {
            Some(tracer) => {
                let mut rec = tracer.lock();
                let id = rec.next_correlation();
                rec.record(
                    EventKind::Prompt,
                    Some(id),
                    Some(fingerprint.clone()),
                    json!({
                        "tag": request.tag,
                        "system_text": request.system_text,
                        "user_text": request.user_text,
                        "temperature": request.temperature,
                        "max_tokens": request.max_tokens,
                    }),
                )?;
                Some(id)
            }
            None => None,
        };

        let result = with_retry(self.backend.as_ref(), request, &self.retry);

        if let Some(tracer) = &self.tracer {
            let mut rec = tracer.lock();
            match &result {
                Ok(response) => {
                    rec.record(
                        EventKind::Completion,
                        correlation,
                        Some(fingerprint),
                        json!({ "tag": request.tag, "text": response.text, "usage": response.usage }),
                    )?;
                }
                Err(err) => {
                    rec.record(
                        EventKind::Error,
                        correlation,
                        Some(fingerprint),
                        json!({ "tag": request.tag, "class": err.class(), "message": err.to_string() }),
                    )?;
                }
            }
        }
        result
    }
}
