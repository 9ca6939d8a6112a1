//! Tool registry and execution.
//!
//! Agents name a tool in their Action section; the registry maps that name
//! (case-insensitively) to an executor. Every failure, including an unknown
//! tool name, comes back as an observation string so the refinement loop
//! can feed it to the agent for self-correction.

mod workspace;

pub use workspace::{normalize_relative, workspace_resolve, Workspace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{parse_write_file_payload, ParseError, FINAL_OUTPUT};
use crate::schema::tool_key;

pub const WRITE_FILE: &str = "Write File";

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("duplicate-tool: {0}")]
    DuplicateTool(String),
    #[error("unknown-tool: '{name}' is not one of [{available}]")]
    UnknownTool { name: String, available: String },
    #[error("path-escape: '{path}' {reason}")]
    PathEscape { path: String, reason: &'static str },
    #[error(transparent)]
    Payload(#[from] ParseError),
    #[error("tool-io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ToolError {
    pub fn code(&self) -> &'static str {
        match self {
            ToolError::DuplicateTool(_) => "duplicate-tool",
            ToolError::UnknownTool { .. } => "unknown-tool",
            ToolError::PathEscape { .. } => "path-escape",
            ToolError::Payload(e) => e.code(),
            ToolError::Io { .. } => "tool-io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToolKind {
    Effectful,
    /// Ends the refinement loop; its input is the step's output.
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDef {
    pub name: String,
    pub description: String,
    pub kind: ToolKind,
}

impl ToolDef {
    pub fn new(name: impl Into<String>, description: impl Into<String>, kind: ToolKind) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            kind,
        }
    }
}

/// Runs a tool against its ActionInput.
pub trait ToolExecutor: Send + Sync {
    fn execute(&self, action_input: &str, workspace: &mut Workspace) -> Result<String, ToolError>;
}

impl<F> ToolExecutor for F
where
    F: Fn(&str, &mut Workspace) -> Result<String, ToolError> + Send + Sync,
{
    fn execute(&self, action_input: &str, workspace: &mut Workspace) -> Result<String, ToolError> {
        self(action_input, workspace)
    }
}

struct WriteFile;

impl ToolExecutor for WriteFile {
    fn execute(&self, action_input: &str, workspace: &mut Workspace) -> Result<String, ToolError> {
        let payload = parse_write_file_payload(action_input)?;
        workspace.write_file(&payload.file_name, &payload.content)
    }
}

struct FinalOutput;

impl ToolExecutor for FinalOutput {
    fn execute(&self, action_input: &str, _: &mut Workspace) -> Result<String, ToolError> {
        Ok(action_input.to_string())
    }
}

/// Result of one tool invocation, already flattened into an observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToolCall {
    /// Canonical registered name, or the raw name when unknown.
    pub tool: String,
    pub observation: String,
    pub terminal: bool,
    /// Error code when the call failed.
    pub error: Option<String>,
}

impl ToolCall {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

pub struct ToolRegistry {
    tools: Vec<(ToolDef, Box<dyn ToolExecutor>)>,
}

impl std::fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.tools.iter().map(|(d, _)| d)).finish()
    }
}

impl Default for ToolRegistry {
    /// Write File and Final Output.
    fn default() -> Self {
        let mut registry = Self::empty();
        registry
            .register_tool(
                ToolDef::new(
                    WRITE_FILE,
                    "write a file into the workspace; ActionInput is '>>>file name<<<', '>>>>>', the content, '<<<<<'",
                    ToolKind::Effectful,
                ),
                WriteFile,
            )
            .expect("fresh registry");
        registry
            .register_tool(
                ToolDef::new(
                    FINAL_OUTPUT,
                    "finish the step; ActionInput is the complete final output",
                    ToolKind::Terminal,
                ),
                FinalOutput,
            )
            .expect("fresh registry");
        registry
    }
}

impl ToolRegistry {
    pub fn empty() -> Self {
        Self { tools: Vec::new() }
    }

    pub fn register_tool(
        &mut self,
        def: ToolDef,
        executor: impl ToolExecutor + 'static,
    ) -> Result<(), ToolError> {
        if self.get(&def.name).is_some() {
            return Err(ToolError::DuplicateTool(def.name));
        }
        self.tools.push((def, Box::new(executor)));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ToolDef> {
        let key = tool_key(name);
        self.tools
            .iter()
            .map(|(d, _)| d)
            .find(|d| tool_key(&d.name) == key)
    }

    /// Registered names in registration order.
    pub fn names(&self) -> Vec<String> {
        self.tools.iter().map(|(d, _)| d.name.clone()).collect()
    }

    pub fn defs(&self) -> impl Iterator<Item = &ToolDef> {
        self.tools.iter().map(|(d, _)| d)
    }

    /// Lowercased names, as validation expects.
    pub fn name_set(&self) -> std::collections::HashSet<String> {
        self.tools.iter().map(|(d, _)| tool_key(&d.name)).collect()
    }

    /// `Write File, Final Output` style listing.
    pub fn render(&self) -> String {
        self.names().join(", ")
    }

    /// Canonical names available to an agent: its registered tools plus every
    /// terminal tool, in registration order.
    pub fn permitted(&self, toolset: &[String]) -> Vec<String> {
        let wanted: Vec<String> = toolset.iter().map(|t| tool_key(t)).collect();
        self.defs()
            .filter(|d| d.kind == ToolKind::Terminal || wanted.contains(&tool_key(&d.name)))
            .map(|d| d.name.clone())
            .collect()
    }

    /// Runs `name`. Never fails: errors become observations.
    pub fn execute_tool(&self, name: &str, action_input: &str, workspace: &mut Workspace) -> ToolCall {
        self.execute_permitted(name, action_input, workspace, None)
    }

    /// Like [`Self::execute_tool`], restricted to `allowed` when given.
    pub fn execute_permitted(
        &self,
        name: &str,
        action_input: &str,
        workspace: &mut Workspace,
        allowed: Option<&[String]>,
    ) -> ToolCall {
        let key = tool_key(name);
        let found = self.tools.iter().find(|(d, _)| {
            tool_key(&d.name) == key
                && allowed.is_none_or(|a| a.iter().any(|t| tool_key(t) == key))
        });
        let Some((def, executor)) = found else {
            let available = allowed.map(|a| a.join(", ")).unwrap_or_else(|| self.render());
            let err = ToolError::UnknownTool {
                name: name.trim().to_string(),
                available,
            };
            return ToolCall {
                tool: name.trim().to_string(),
                observation: err.to_string(),
                terminal: false,
                error: Some(err.code().to_string()),
            };
        };
        match executor.execute(action_input, workspace) {
            Ok(observation) => ToolCall {
                tool: def.name.clone(),
                observation,
                terminal: def.kind == ToolKind::Terminal,
                error: None,
            },
            Err(err) => ToolCall {
                tool: def.name.clone(),
                observation: err.to_string(),
                terminal: false,
                error: Some(err.code().to_string()),
            },
        }
    }
}
