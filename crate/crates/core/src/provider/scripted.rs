use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, Fingerprint, LlmBackend, ProviderError};

/// One line of a script file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

impl ScriptEntry {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            fingerprint: None,
        }
    }
}

/// Deterministic backend serving responses by call sequence.
#[derive(Debug)]
pub struct ScriptedBackend {
    id: String,
    entries: Vec<ScriptEntry>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            id: "scripted".into(),
            entries,
            cursor: Mutex::new(0),
        }
    }

    pub fn from_texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(texts.into_iter().map(ScriptEntry::text).collect())
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Reads a JSON Lines script: one `{"text": ..., "fingerprint": ...}`
    /// object per non-blank line.
    pub fn from_jsonl(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::InvalidScript(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&text)
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, ProviderError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                serde_json::from_str::<ScriptEntry>(line)
                    .map_err(|e| ProviderError::InvalidScript(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(entries))
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("script entry serializes") + "\n")
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Calls served so far.
    pub fn calls(&self) -> usize {
        *self.cursor.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// The response for a 1-based call number, checked against the recorded
    /// fingerprint when the script carries one.
    pub fn scripted_lookup(
        &self,
        call: usize,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, ProviderError> {
        let entry = call
            .checked_sub(1)
            .and_then(|i| self.entries.get(i))
            .ok_or(ProviderError::ScriptExhausted { call })?;
        if let Some(recorded) = &entry.fingerprint {
            let recorded: Fingerprint = recorded
                .parse()
                .map_err(|e: String| ProviderError::InvalidScript(e))?;
            if let Some(field) = recorded.first_difference(&request.fingerprint()) {
                return Err(ProviderError::ReplayDivergence { call, field });
            }
        }
        Ok(CompletionResponse {
            text: entry.text.clone(),
            usage: None,
            backend_id: self.id.clone(),
        })
    }
}

impl LlmBackend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let call = {
            let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
            *cursor += 1;
            *cursor
        };
        self.scripted_lookup(call, request)
    }
}
