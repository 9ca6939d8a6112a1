//! Trivia creative writing: a story about a topic must mention the answers
//! to N trivia questions. Score is the fraction of questions with at least
//! one answer variant present in the story.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("bad-benchmark: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad-benchmark: line {line}: {reason}")]
    BadBenchmark { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriviaQuestion {
    pub text: String,
    pub answer_variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriviaTask {
    pub topic: String,
    pub questions: Vec<TriviaQuestion>,
}

impl TriviaTask {
    pub fn n(&self) -> usize {
        self.questions.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.questions.is_empty() {
            return Err("task has no questions".into());
        }
        for (i, q) in self.questions.iter().enumerate() {
            if q.answer_variants.is_empty() {
                return Err(format!("question {} has no answer variants", i + 1));
            }
            if q.answer_variants.iter().any(|v| v.trim().is_empty()) {
                return Err(format!("question {} has an empty answer variant", i + 1));
            }
        }
        Ok(())
    }

    /// The instruction given to the engine.
    pub fn prompt(&self) -> String {
        let mut out = format!(
            "Write a short and coherent story about {} that incorporates the answers to the following {} questions:",
            self.topic,
            self.n()
        );
        for (i, q) in self.questions.iter().enumerate() {
            let _ = write!(out, "\n{}. {}", i + 1, q.text);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriviaScore {
    pub correct_mentions: usize,
    pub total: usize,
    pub score: f64,
}

/// Case-folds and collapses whitespace runs to single spaces.
///
/// Lowercasing is per character: `str::to_lowercase` treats a final sigma
/// specially, which would let appended text change earlier characters.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .chars()
        .flat_map(char::to_lowercase)
        .collect()
}

pub fn score_output(story: &str, task: &TriviaTask) -> TriviaScore {
    let story = normalize(story);
    let correct_mentions = task
        .questions
        .iter()
        .filter(|q| {
            q.answer_variants.iter().any(|v| {
                let v = normalize(v);
                !v.is_empty() && story.contains(&v)
            })
        })
        .count();
    let total = task.n();
    let score = if total == 0 {
        0.0
    } else {
        correct_mentions as f64 / total as f64
    };
    TriviaScore {
        correct_mentions,
        total,
        score,
    }
}

/// Reads a JSON Lines benchmark: one `{topic, questions: [{text,
/// answer_variants}]}` object per non-blank line.
pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<TriviaTask>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_benchmark(&text)
}

pub fn parse_benchmark(text: &str) -> Result<Vec<TriviaTask>, EvalError> {
    let mut tasks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| EvalError::BadBenchmark { line: i + 1, reason };
        let task: TriviaTask = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        task.validate().map_err(bad)?;
        tasks.push(task);
    }
    Ok(tasks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskEval {
    pub topic: String,
    pub score: TriviaScore,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub method: String,
    pub tasks: Vec<TaskEval>,
    /// Unweighted mean of per-task scores, as a percentage.
    pub mean_score: f64,
    /// Total correct mentions over total questions, as a percentage.
    pub question_level_score: f64,
}

impl BenchmarkReport {
    pub fn from_tasks(method: impl Into<String>, tasks: Vec<TaskEval>) -> Self {
        let mean_score = if tasks.is_empty() {
            0.0
        } else {
            100.0 * tasks.iter().map(|t| t.score.score).sum::<f64>() / tasks.len() as f64
        };
        let correct: usize = tasks.iter().map(|t| t.score.correct_mentions).sum();
        let total: usize = tasks.iter().map(|t| t.score.total).sum();
        let question_level_score = if total == 0 {
            0.0
        } else {
            100.0 * correct as f64 / total as f64
        };
        Self {
            method: method.into(),
            tasks,
            mean_score,
            question_level_score,
        }
    }

    /// Method / score / delta table, with the delta against `baseline`.
    pub fn table(&self, baseline: Option<&BenchmarkReport>) -> String {
        let mut out = String::from("| Method | Score (%) | Δ vs baseline |\n|---|---|---|\n");
        if let Some(base) = baseline {
            let _ = writeln!(out, "| {} | {:.1} | - |", base.method, base.mean_score);
        }
        let delta = baseline
            .map(|b| format!("{:+.1}", self.mean_score - b.mean_score))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "| {} | {:.1} | {} |", self.method, self.mean_score, delta);
        out
    }
}

/// Runs every task through `run` (which returns the final story) and
/// scores it. A failed task scores zero and the run continues.
pub fn run_benchmark<F, E>(method: &str, tasks: &[TriviaTask], mut run: F) -> BenchmarkReport
where
    F: FnMut(usize, &TriviaTask) -> Result<String, E>,
    E: std::fmt::Display,
{
    let evals = tasks
        .iter()
        .enumerate()
        .map(|(i, task)| match run(i, task) {
            Ok(story) => TaskEval {
                topic: task.topic.clone(),
                score: score_output(&story, task),
                error: None,
            },
            Err(err) => TaskEval {
                topic: task.topic.clone(),
                score: TriviaScore {
                    correct_mentions: 0,
                    total: task.n(),
                    score: 0.0,
                },
                error: Some(err.to_string()),
            },
        })
        .collect();
    BenchmarkReport::from_tasks(method, evals)
}
