//! Scripted drafting scenarios with known outcomes.

use teamsmith_core::drafting::{DraftOutcome, DraftingResult};
use teamsmith_core::AgentSpec;

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Converged(u32),
    CapReached,
    Failed,
}

pub struct Scenario {
    pub name: &'static str,
    pub replies: Vec<String>,
    pub expect: Expect,
    /// Model calls the scenario must make.
    pub calls: usize,
    pub check: Option<fn(&DraftingResult) -> bool>,
}

impl Expect {
    pub fn matches(self, result: &Result<DraftingResult, teamsmith_core::drafting::DraftingError>) -> bool {
        match (self, result) {
            (Expect::Converged(r), Ok(res)) => res.outcome == DraftOutcome::Converged && res.rounds == r,
            (Expect::CapReached, Ok(res)) => res.outcome == DraftOutcome::CapReached,
            (Expect::Failed, Err(e)) => e.code() == "drafting-failed",
            _ => false,
        }
    }
}

pub const QUESTION: &str = "What is the tallest mountain on Earth?";

fn researcher() -> AgentSpec {
    role("Researcher", "a geography researcher", &[])
}

fn team() -> Vec<AgentSpec> {
    vec![researcher(), language_expert()]
}

fn plan() -> Vec<String> {
    vec![
        step("Researcher", "Find the tallest mountain and its height."),
        final_step(QUESTION),
    ]
}

fn good() -> String {
    planner_reply(&[], &team(), &plan())
}

fn sugg(text: &str) -> String {
    critique(text)
}

fn repeat(block: &[String], n: usize) -> Vec<String> {
    (0..n).flat_map(|_| block.iter().cloned()).collect()
}

pub fn drafting_scenarios() -> Vec<Scenario> {
    let s = || sugg("1. Clarify the researcher's sources.");
    let c = clean;
    let no_prompt_key = planner_reply(&[], &[], &plan()).replace(
        "```\nNone\n```\n\n## Execution Plan",
        &format!(
            "```\n{{\"name\": \"Researcher\", \"description\": \"a geography researcher\", \"tools\": [], \"suggestions\": \"cite\"}},\n{}\n```\n\n## Execution Plan",
            language_expert().to_blob()
        ),
    );
    let truncated = planner_reply(&[], &[language_expert()], &plan()).replace(
        "```\n{",
        "```\n{\"name\": \"Researcher\", \"description\": \n{",
    );
    let relaxed = good()
        .replace("\"name\": \"Researcher\"", "\u{201c}name\u{201d}: \u{201c}Researcher\u{201d}")
        .replace("\n}", ",\n}");
    let no_language_expert = planner_reply(
        &[],
        &[researcher()],
        &[step("Researcher", "Find the tallest mountain and answer.")],
    );
    let unknown_tool = planner_reply(
        &[],
        &[role("Researcher", "a geography researcher", &["Google Search"]), language_expert()],
        &plan(),
    );
    let unknown_agent = planner_reply(
        &[],
        &team(),
        &[
            step("Researcher", "Find the mountain."),
            step("Geologist", "Check the rock."),
            final_step(QUESTION),
        ],
    );
    let no_final_marker = planner_reply(
        &[],
        &team(),
        &[step("Language Expert", "Summarize."), step("Researcher", "Find the mountain.")],
    );
    let duplicate = planner_reply(&[], &[researcher(), researcher(), language_expert()], &plan());
    let headerless = format!(
        "Here is the team.\n{}\n{}\nPlan:\n1. {}\n2. {}\n",
        researcher().to_blob(),
        language_expert().to_blob(),
        plan()[0],
        plan()[1]
    );
    let bullets = good().replace("1. Researcher", "- Researcher").replace(
        "2. Language Expert",
        "- Language Expert",
    );
    let bold = "**Thought:** fine\n**Suggestions:** No Suggestions".to_string();
    let with_geologist = planner_reply(
        &[],
        &[researcher(), role("Geologist", "a geologist", &[]), language_expert()],
        &[
            step("Researcher", "Find the mountain."),
            step("Geologist", "Explain how it formed."),
            final_step(QUESTION),
        ],
    );

    vec![
        Scenario { name: "immediate convergence", replies: vec![good(), c(), c()], expect: Expect::Converged(1), calls: 3, check: None },
        Scenario { name: "agent critique then round 2", replies: vec![good(), s(), c(), good(), c(), c()], expect: Expect::Converged(2), calls: 6, check: None },
        Scenario { name: "plan critique then round 2", replies: vec![good(), c(), s(), good(), c(), c()], expect: Expect::Converged(2), calls: 6, check: None },
        Scenario { name: "convergence at round 3", replies: vec![good(), s(), s(), good(), s(), c(), good(), c(), c()], expect: Expect::Converged(3), calls: 9, check: None },
        Scenario { name: "observers never approve", replies: repeat(&[good(), s(), s()], 3), expect: Expect::CapReached, calls: 9, check: None },
        Scenario { name: "plan observer never approves", replies: repeat(&[good(), c(), s()], 3), expect: Expect::CapReached, calls: 9, check: None },
        Scenario { name: "approval must be simultaneous", replies: vec![good(), c(), s(), good(), s(), c(), good(), c(), c()], expect: Expect::Converged(3), calls: 9, check: None },
        Scenario { name: "alternating approval hits cap", replies: vec![good(), c(), s(), good(), s(), c(), good(), c(), s()], expect: Expect::CapReached, calls: 9, check: None },
        Scenario { name: "blob missing prompt key recovered", replies: vec![no_prompt_key, good(), c(), c()], expect: Expect::Converged(1), calls: 4, check: None },
        Scenario { name: "truncated JSON recovered", replies: vec![truncated, good(), c(), c()], expect: Expect::Converged(1), calls: 4, check: None },
        Scenario { name: "curly quotes and trailing commas tolerated", replies: vec![relaxed, c(), c()], expect: Expect::Converged(1), calls: 3, check: None },
        Scenario { name: "missing language expert rejected then fixed", replies: vec![no_language_expert.clone(), good(), c(), c()], expect: Expect::Converged(1), calls: 4, check: None },
        Scenario { name: "missing language expert exhausts reprompts", replies: vec![no_language_expert.clone(), no_language_expert.clone(), no_language_expert], expect: Expect::Failed, calls: 3, check: None },
        Scenario { name: "unknown tool rejected then fixed", replies: vec![unknown_tool, good(), c(), c()], expect: Expect::Converged(1), calls: 4, check: None },
        Scenario { name: "unknown agent rejected then fixed", replies: vec![unknown_agent, good(), c(), c()], expect: Expect::Converged(1), calls: 4, check: None },
        Scenario { name: "missing final summary step rejected then fixed", replies: vec![no_final_marker, good(), c(), c()], expect: Expect::Converged(1), calls: 4, check: None },
        Scenario { name: "duplicate names rejected twice then fixed", replies: vec![duplicate.clone(), duplicate, good(), c(), c()], expect: Expect::Converged(1), calls: 5, check: None },
        Scenario { name: "observer without Suggestions header reprompted", replies: vec![good(), "I like it.".into(), c(), c()], expect: Expect::Converged(1), calls: 4, check: None },
        Scenario { name: "observer never follows format", replies: vec![good(), "ok".into(), "fine".into(), "good".into()], expect: Expect::Failed, calls: 4, check: None },
        Scenario { name: "headerless planner output", replies: vec![headerless, c(), c()], expect: Expect::Converged(1), calls: 3, check: None },
        Scenario {
            name: "selected and created roles",
            replies: vec![planner_reply(&[researcher()], &[language_expert()], &plan()), c(), c()],
            expect: Expect::Converged(1),
            calls: 3,
            check: Some(|r| r.team.selected_roles.len() == 1 && r.team.created_roles.len() == 1),
        },
        Scenario { name: "bulleted plan rejected then numbered", replies: vec![bullets, good(), c(), c()], expect: Expect::Converged(1), calls: 4, check: None },
        Scenario {
            name: "round 2 planner exhausts reprompts",
            replies: vec![good(), s(), c(), "no".into(), "still no".into(), "never".into()],
            expect: Expect::Failed,
            calls: 6,
            check: None,
        },
        Scenario {
            name: "cap reached returns the latest draft",
            replies: vec![good(), s(), s(), good(), s(), s(), with_geologist, s(), s()],
            expect: Expect::CapReached,
            calls: 9,
            check: Some(|r| r.team.role("Geologist").is_some() && r.team.revision == 2),
        },
        Scenario { name: "bold inline headers", replies: vec![good(), bold.clone(), bold], expect: Expect::Converged(1), calls: 3, check: None },
    ]
}
