//! Filesystem confinement for tool writes.

use std::fs;
use std::path::{Component, Path, PathBuf};

use super::ToolError;

/// A directory tools may write into, plus the manifest of what they wrote.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    files_written: Vec<String>,
    writes: usize,
}

impl Workspace {
    /// Opens (creating if needed) a workspace rooted at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, ToolError> {
        let root = root.as_ref();
        fs::create_dir_all(root).map_err(|source| ToolError::Io {
            path: root.display().to_string(),
            source,
        })?;
        let root = root.canonicalize().map_err(|source| ToolError::Io {
            path: root.display().to_string(),
            source,
        })?;
        Ok(Self {
            root,
            files_written: Vec::new(),
            writes: 0,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative paths written so far, in first-write order, without repeats.
    pub fn files_written(&self) -> &[String] {
        &self.files_written
    }

    /// Total writes, counting overwrites.
    pub fn write_count(&self) -> usize {
        self.writes
    }

    pub fn resolve(&self, candidate: &str) -> Result<PathBuf, ToolError> {
        workspace_resolve(&self.root, candidate)
    }

    /// Writes `content` to `candidate` and returns the observation text.
    pub fn write_file(&mut self, candidate: &str, content: &str) -> Result<String, ToolError> {
        let relative = normalize_relative(candidate)?;
        let target = self.resolve(candidate)?;
        let io = |source| ToolError::Io {
            path: relative.clone(),
            source,
        };
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        // directories created above may not hide a link out of the root
        let target = self.resolve(candidate)?;
        if target.is_dir() {
            return Err(ToolError::Io {
                path: relative,
                source: std::io::Error::other("is a directory"),
            });
        }
        let existed = target.exists();
        fs::write(&target, content.as_bytes()).map_err(io)?;
        self.writes += 1;
        if !self.files_written.contains(&relative) {
            self.files_written.push(relative.clone());
        }
        let verb = if existed { "overwrote" } else { "wrote" };
        Ok(format!("{verb} {relative} ({} bytes)", content.len()))
    }

    pub fn read_file(&self, candidate: &str) -> Result<String, ToolError> {
        let target = self.resolve(candidate)?;
        fs::read_to_string(&target).map_err(|source| ToolError::Io {
            path: candidate.to_string(),
            source,
        })
    }
}

fn escape(candidate: &str, reason: &'static str) -> ToolError {
    ToolError::PathEscape {
        path: candidate.to_string(),
        reason,
    }
}

/// Lexically normalizes a relative path to `a/b/c` form.
///
/// Both `/` and `\` separate components. Absolute paths, drive prefixes,
/// `..` that would leave the root, NUL bytes and empty results are rejected.
pub fn normalize_relative(candidate: &str) -> Result<String, ToolError> {
    if candidate.contains('\0') {
        return Err(escape(candidate, "contains a NUL byte"));
    }
    let trimmed = candidate.trim();
    if trimmed.starts_with(['/', '\\']) || Path::new(trimmed).is_absolute() {
        return Err(escape(candidate, "absolute path"));
    }
    if trimmed.len() >= 2 && trimmed.as_bytes()[0].is_ascii_alphabetic() && trimmed.as_bytes()[1] == b':' {
        return Err(escape(candidate, "drive prefix"));
    }
    let mut parts: Vec<&str> = Vec::new();
    for part in trimmed.split(['/', '\\']) {
        match part {
            "" | "." => {}
            ".." => {
                if parts.pop().is_none() {
                    return Err(escape(candidate, "leaves the workspace root"));
                }
            }
            p => parts.push(p),
        }
    }
    if parts.is_empty() {
        return Err(escape(candidate, "names the workspace root itself"));
    }
    Ok(parts.join("/"))
}

/// Resolves `candidate` to an absolute path inside `root`.
///
/// Existing prefixes of the result are checked physically, so a symlink
/// inside the workspace cannot redirect a write outside it.
pub fn workspace_resolve(root: &Path, candidate: &str) -> Result<PathBuf, ToolError> {
    let relative = normalize_relative(candidate)?;
    let root = root.canonicalize().map_err(|source| ToolError::Io {
        path: root.display().to_string(),
        source,
    })?;
    let mut current = root.clone();
    for part in relative.split('/') {
        current.push(part);
        match fs::symlink_metadata(&current) {
            Ok(meta) if meta.file_type().is_symlink() => {
                let real = current
                    .canonicalize()
                    .map_err(|_| escape(candidate, "dangling symlink"))?;
                if !real.starts_with(&root) {
                    return Err(escape(candidate, "symlink points outside the workspace"));
                }
            }
            Ok(_) => {}
            Err(_) => break,
        }
    }
    let resolved = root.join(&relative);
    debug_assert!(resolved
        .components()
        .all(|c| !matches!(c, Component::ParentDir)));
    Ok(resolved)
}
