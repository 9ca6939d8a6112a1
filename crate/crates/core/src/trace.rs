//! Append-only JSON Lines event log for runs.
//!
//! Every prompt, completion, parse outcome, tool call and state transition is
//! written (and flushed) before the engine moves on. A completed trace is
//! enough to rebuild a scripted backend and replay the run byte-for-byte.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::provider::{ScriptEntry, ScriptedBackend};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace-io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt-trace at line {line} (seq {seq:?}): {reason}")]
    Corrupt {
        line: usize,
        seq: Option<u64>,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Drafting,
    Execution,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Prompt,
    Completion,
    Parse,
    Tool,
    Transition,
    Error,
}

/// One line of a trace file. Field order here is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub ts_ms: u64,
    pub phase: Phase,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    pub payload: Value,
}

impl TraceEvent {
    /// Copy with the timestamp zeroed, for equality checks across runs.
    pub fn without_timestamp(&self) -> TraceEvent {
        TraceEvent {
            ts_ms: 0,
            ..self.clone()
        }
    }
}

/// Trace destination. Memory-only recorders are used by tests and replays.
#[derive(Debug)]
enum Sink {
    Memory,
    File { path: PathBuf, file: File },
}

#[derive(Debug)]
pub struct TraceRecorder {
    sink: Sink,
    events: Vec<TraceEvent>,
    phase: Phase,
    next_correlation: u64,
}

impl TraceRecorder {
    pub fn in_memory() -> Self {
        Self {
            sink: Sink::Memory,
            events: Vec::new(),
            phase: Phase::Drafting,
            next_correlation: 1,
        }
    }

    /// Opens (truncating) a trace file. Fails with `trace-io` if the path is
    /// not writable.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(|source| TraceError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(Self {
            sink: Sink::File { path, file },
            events: Vec::new(),
            phase: Phase::Drafting,
            next_correlation: 1,
        })
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn next_correlation(&mut self) -> u64 {
        let id = self.next_correlation;
        self.next_correlation += 1;
        id
    }

    /// Appends an event in the current phase. The line is flushed before
    /// this returns.
    pub fn record(
        &mut self,
        kind: EventKind,
        correlation: Option<u64>,
        fingerprint: Option<String>,
        payload: Value,
    ) -> Result<&TraceEvent, TraceError> {
        let event = TraceEvent {
            seq: self.events.len() as u64 + 1,
            ts_ms: now_ms(),
            phase: self.phase,
            kind,
            correlation,
            fingerprint,
            payload,
        };
        self.record_event(event)
    }

    pub fn record_event(&mut self, mut event: TraceEvent) -> Result<&TraceEvent, TraceError> {
        event.seq = self.events.len() as u64 + 1;
        if let Sink::File { path, file } = &mut self.sink {
            let mut line = serde_json::to_string(&event).expect("trace event serializes");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| TraceError::Io {
                    path: path.clone(),
                    source,
                })?;
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.sink {
            Sink::File { path, .. } => Some(path),
            Sink::Memory => None,
        }
    }
}

/// Shared handle to a recorder, cloned into the provider and the engine.
#[derive(Debug, Clone)]
pub struct Tracer(Arc<Mutex<TraceRecorder>>);

impl Tracer {
    pub fn new(recorder: TraceRecorder) -> Self {
        Self(Arc::new(Mutex::new(recorder)))
    }

    pub fn in_memory() -> Self {
        Self::new(TraceRecorder::in_memory())
    }

    pub fn lock(&self) -> MutexGuard<'_, TraceRecorder> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn set_phase(&self, phase: Phase) {
        self.lock().set_phase(phase);
    }

    pub fn record(&self, kind: EventKind, payload: Value) -> Result<(), TraceError> {
        self.lock().record(kind, None, None, payload).map(|_| ())
    }

    pub fn transition(&self, event: &str, mut detail: Value) -> Result<(), TraceError> {
        if let Value::Object(map) = &mut detail {
            map.insert("event".into(), Value::String(event.into()));
        } else {
            detail = serde_json::json!({ "event": event, "detail": detail });
        }
        self.record(EventKind::Transition, detail)
    }

    pub fn snapshot(&self) -> Vec<TraceEvent> {
        self.lock().events().to_vec()
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Reads a trace file, checking seq gaplessness and prompt/completion pairing.
pub fn load_run(path: impl AsRef<Path>) -> Result<Vec<TraceEvent>, TraceError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| TraceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let event: TraceEvent = serde_json::from_str(&line).map_err(|e| TraceError::Corrupt {
            line: line_no,
            seq: None,
            reason: format!("unparseable event: {e}"),
        })?;
        events.push((line_no, event));
    }
    verify(&events)?;
    Ok(events.into_iter().map(|(_, e)| e).collect())
}

/// Structural checks over an in-memory event list.
pub fn verify_events(events: &[TraceEvent]) -> Result<(), TraceError> {
    let numbered: Vec<(usize, TraceEvent)> = events
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, e)| (i + 1, e))
        .collect();
    verify(&numbered)
}

fn verify(events: &[(usize, TraceEvent)]) -> Result<(), TraceError> {
    let mut open: HashMap<u64, usize> = HashMap::new();
    for (position, (line, event)) in events.iter().enumerate() {
        let expected = position as u64 + 1;
        if event.seq != expected {
            return Err(TraceError::Corrupt {
                line: *line,
                seq: Some(expected),
                reason: format!("seq gap: expected {expected}, found {}", event.seq),
            });
        }
        match event.kind {
            EventKind::Prompt => {
                let Some(id) = event.correlation else {
                    return Err(corrupt(*line, event, "prompt without correlation id"));
                };
                if open.insert(id, *line).is_some() {
                    return Err(corrupt(*line, event, "duplicate prompt correlation id"));
                }
            }
            EventKind::Completion => {
                let Some(id) = event.correlation else {
                    return Err(corrupt(*line, event, "completion without correlation id"));
                };
                if open.remove(&id).is_none() {
                    return Err(corrupt(*line, event, "completion without matching prompt"));
                }
            }
            EventKind::Error => {
                if let Some(id) = event.correlation {
                    if open.remove(&id).is_none() {
                        return Err(corrupt(*line, event, "error without matching prompt"));
                    }
                }
            }
            _ => {}
        }
    }
    if let Some((&id, &line)) = open.iter().min_by_key(|(_, &l)| l) {
        return Err(TraceError::Corrupt {
            line,
            seq: None,
            reason: format!("prompt {id} has no completion or error"),
        });
    }
    Ok(())
}

fn corrupt(line: usize, event: &TraceEvent, reason: &str) -> TraceError {
    TraceError::Corrupt {
        line,
        seq: Some(event.seq),
        reason: reason.to_string(),
    }
}

/// Builds a scripted backend that serves the recorded completions in order,
/// each guarded by the fingerprint of the prompt it answered.
pub fn replay_backend(events: &[TraceEvent]) -> ScriptedBackend {
    let entries = events
        .iter()
        .filter(|e| e.kind == EventKind::Completion)
        .map(|e| ScriptEntry {
            text: e
                .payload
                .get("text")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            fingerprint: e.fingerprint.clone(),
        })
        .collect();
    ScriptedBackend::new(entries).with_id("replay")
}

/// Compares two traces ignoring timestamps. Returns the first differing seq.
pub fn first_difference(a: &[TraceEvent], b: &[TraceEvent]) -> Option<u64> {
    let n = a.len().max(b.len());
    (0..n)
        .find(|&i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => x.without_timestamp() != y.without_timestamp(),
            _ => true,
        })
        .map(|i| i as u64 + 1)
}

/// Per-phase, per-kind event counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TraceStats {
    pub counts: BTreeMap<Phase, BTreeMap<EventKind, usize>>,
    pub total: usize,
}

impl TraceStats {
    pub fn of(events: &[TraceEvent]) -> Self {
        let mut stats = TraceStats::default();
        for e in events {
            *stats
                .counts
                .entry(e.phase)
                .or_default()
                .entry(e.kind)
                .or_default() += 1;
            stats.total += 1;
        }
        stats
    }

    pub fn count(&self, phase: Phase, kind: EventKind) -> usize {
        self.counts
            .get(&phase)
            .and_then(|m| m.get(&kind))
            .copied()
            .unwrap_or(0)
    }

    /// Model calls (prompt events) per phase.
    pub fn model_calls(&self, phase: Phase) -> usize {
        self.count(phase, EventKind::Prompt)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (phase, kinds) in &self.counts {
            let phase = serde_json::to_value(phase).unwrap();
            out.push_str(&format!("{}:\n", phase.as_str().unwrap_or("?")));
            for (kind, n) in kinds {
                let kind = serde_json::to_value(kind).unwrap();
                out.push_str(&format!("  {:<11} {n}\n", kind.as_str().unwrap_or("?")));
            }
        }
        out.push_str(&format!("total events: {}\n", self.total));
        out
    }
}
