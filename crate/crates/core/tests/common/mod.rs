//! Shared fixtures: reply builders, scripted teams, and run helpers.
#![allow(dead_code)]

pub mod scenarios;

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use teamsmith_core::prompt::format_write_file_payload;
use teamsmith_core::provider::{
    Client, CompletionRequest, CompletionResponse, LlmBackend, ProviderError, RetryPolicy,
    ScriptedBackend,
};
use teamsmith_core::toolkit::Workspace;
use teamsmith_core::trace::{TraceEvent, TraceRecorder, Tracer};
use teamsmith_core::{AgentSpec, Engine, EngineError, RunConfig, RunOutcome, Task};

pub const LANGUAGE_EXPERT_STEP: &str = "Language Expert: Based on the previous steps, please provide a helpful, relevant, accurate, and detailed response to the user's original question:";

pub fn fixture_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture_path(rel)).expect("fixture exists")
}

pub fn role(name: &str, description: &str, tools: &[&str]) -> AgentSpec {
    AgentSpec::new(
        name,
        description,
        tools.iter().map(|t| t.to_string()).collect(),
        format!("{name} should double-check the work."),
        format!("You are {description}, named {name}. Your goal is to complete your step well."),
    )
}

pub fn language_expert() -> AgentSpec {
    role(
        "Language Expert",
        "a language expert who writes the final response",
        &[],
    )
}

pub fn blobs(roles: &[AgentSpec]) -> String {
    if roles.is_empty() {
        return "None".into();
    }
    roles.iter().map(AgentSpec::to_blob).collect::<Vec<_>>().join(",\n")
}

/// A planner reply in the documented section layout.
pub fn planner_reply(selected: &[AgentSpec], created: &[AgentSpec], plan: &[String]) -> String {
    let plan: Vec<String> = plan
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect();
    format!(
        "## Thought\nThe task needs these experts.\n\n## Question or Task:\nsee above\n\n## Selected Roles List:\n```\n{}\n```\n\n## Created Roles List:\n```\n{}\n```\n\n## Execution Plan:\n{}\n\n## RoleFeedback\nnone\n\n## PlanFeedback\nnone\n",
        blobs(selected),
        blobs(created),
        plan.join("\n")
    )
}

pub fn critique(body: &str) -> String {
    format!("## Thought\nI reviewed the draft.\n\n## Suggestions\n{body}\n")
}

pub fn clean() -> String {
    critique("No Suggestions")
}

pub fn next_step(line: &str) -> String {
    format!("## Thought\nThis step is next.\n\n## NextStep\n{line}\n\n## RelevantHistory\nNone so far.\n")
}

pub fn action(current: &str, tool: &str, input: &str) -> String {
    format!(
        "## Thought\nI will proceed.\n\n## Task\nthe step\n\n## CurrentStep\n{current}\n\n## Action\n{tool}\n\n## ActionInput\n{input}"
    )
}

pub fn final_output(text: &str) -> String {
    action("Summarize the results", "Final Output", text)
}

pub fn write_file(name: &str, content: &str) -> String {
    action(
        &format!("Write {name}"),
        "Write File",
        &format_write_file_payload(name, content),
    )
}

/// A plan line `Agents: description`, matching how the engine renders it.
pub fn step(agents: &str, text: &str) -> String {
    format!("{agents}: {text}")
}

pub fn final_step(question: &str) -> String {
    format!("{LANGUAGE_EXPERT_STEP} {question}")
}

/// A scripted end-to-end run: task, replies in call order, expectations.
#[derive(Debug, Clone)]
pub struct ScriptedRun {
    pub name: &'static str,
    pub task: String,
    pub replies: Vec<String>,
    pub expected_answer: String,
    pub expected_files: Vec<(String, String)>,
}

pub const TETRIS_TASK: &str = "Develop a Tetris game in Python.";
pub const TETRIS_ANSWER: &str = "The Tetris game is implemented in tetris.py, following the design in pseudocode.txt. It supports moving, rotating and dropping pieces, clears full rows and keeps score; the testing expert verified the collision and line-clear logic.";

pub fn tetris_roles() -> Vec<AgentSpec> {
    vec![
        role("Game Design Expert", "a game design expert who defines rules and mechanics", &["Write File"]),
        role("UI Design Expert", "a UI design expert who plans layouts and visuals", &["Write File"]),
        role("Programmer", "a Python programmer who writes clean code", &["Write File"]),
        role("Testing Expert", "a software testing expert who reviews programs", &["Write File"]),
        language_expert(),
    ]
}

pub fn tetris_plan() -> Vec<String> {
    vec![
        step("Game Design Expert", "Define the rules, scoring and controls of the Tetris game."),
        step("UI Design Expert", "Design the board layout and visual style of the game window."),
        step("Programmer", "Write pseudo code for the game, then implement it in tetris.py."),
        step("Testing Expert", "Review tetris.py and verify the movement, collision and line-clear logic."),
        final_step(TETRIS_TASK),
    ]
}

/// Drafting as in the corrected team: round 1 lacks a tester, the agent
/// observer asks for one, round 2 adds it and both observers approve.
pub fn tetris_run() -> ScriptedRun {
    let roles = tetris_roles();
    let without_tester: Vec<AgentSpec> = roles
        .iter()
        .filter(|r| r.name != "Testing Expert")
        .cloned()
        .collect();
    let mut plan_without_tester = tetris_plan();
    plan_without_tester.remove(3);
    let pseudocode = fixture("tetris/pseudocode.txt");
    let program = fixture("tetris/tetris.py");
    let plan = tetris_plan();
    let replies = vec![
        planner_reply(&[], &without_tester, &plan_without_tester),
        critique("1. Add a testing expert who verifies the program."),
        critique("1. Add a step in which the program is tested."),
        planner_reply(&[], &roles, &plan),
        clean(),
        clean(),
        next_step(&plan[0]),
        final_output("Rules: pieces fall one row per tick; full rows clear for 100 points each; arrows move and rotate."),
        next_step(&plan[1]),
        final_output("Layout: a 10x20 board on the left, score and next piece on the right."),
        next_step(&plan[2]),
        write_file("pseudocode.txt", &pseudocode),
        write_file("tetris.py", &program),
        final_output("Wrote pseudocode.txt and tetris.py implementing the game loop, collisions and scoring."),
        next_step(&plan[3]),
        final_output("Verified: pieces stop at the floor and other blocks; full rows clear and score increases."),
        next_step(&plan[4]),
        final_output(TETRIS_ANSWER),
    ];
    ScriptedRun {
        name: "tetris",
        task: TETRIS_TASK.into(),
        replies,
        expected_answer: TETRIS_ANSWER.into(),
        expected_files: vec![
            ("pseudocode.txt".into(), pseudocode),
            ("tetris.py".into(), program),
        ],
    }
}

pub const TRIVIA_TASK: &str = "Write a short and coherent story about Harry Potter that incorporates the answers to the following 5 questions:\n1. Who was the man behind The Chipmunks?\n2. Which Lloyd Webber musical premiered in the US on 10th December 1993?\n3. Who was the next British Prime Minister after Arthur Balfour?\n4. Who had a 70s No 1 hit with Kiss You All Over?\n5. What claimed the life of singer Kathleen Ferrier?";
pub const TRIVIA_STORY: &str = "Harry hummed a tune by David Seville while Hermione read about Sunset Boulevard. Ron argued that Campbell-Bannerman followed Balfour, Neville played a record by Exile, and Dumbledore spoke softly of cancer and the singers it took.";

/// Four steps: two domain experts retrieve answers, a writer composes, the
/// language expert checks coherence and answers.
pub fn trivia_run() -> ScriptedRun {
    let roles = vec![
        role("Music Historian", "a music historian who knows popular music", &[]),
        role("Political Historian", "a political historian of Britain", &[]),
        role("Story Writer", "a creative story writer", &[]),
        language_expert(),
    ];
    let plan = vec![
        step("Music Historian", "Answer the questions about music: 1, 2, 4 and 5."),
        step("Political Historian", "Answer question 3 about British Prime Ministers."),
        step("Story Writer", "Write a Harry Potter story that includes every answer."),
        final_step("check the story is coherent and includes all answers."),
    ];
    let replies = vec![
        planner_reply(&[], &roles, &plan),
        clean(),
        clean(),
        next_step(&plan[0]),
        final_output("1. David Seville 2. Sunset Boulevard 4. Exile 5. Cancer"),
        next_step(&plan[1]),
        final_output("3. Henry Campbell-Bannerman"),
        next_step(&plan[2]),
        final_output(TRIVIA_STORY),
        next_step(&plan[3]),
        final_output(TRIVIA_STORY),
    ];
    ScriptedRun {
        name: "trivia",
        task: TRIVIA_TASK.into(),
        replies,
        expected_answer: TRIVIA_STORY.into(),
        expected_files: vec![],
    }
}

/// Researcher answers, language expert summarizes.
pub fn minimal_run() -> ScriptedRun {
    let roles = vec![role("Researcher", "a careful researcher", &[]), language_expert()];
    let plan = vec![
        step("Researcher", "Find the boiling point of water at sea level."),
        final_step("What is the boiling point of water?"),
    ];
    let replies = vec![
        planner_reply(&[], &roles, &plan),
        clean(),
        clean(),
        next_step(&plan[0]),
        final_output("100 degrees Celsius at one atmosphere."),
        next_step(&plan[1]),
        final_output("Water boils at 100 °C (212 °F) at sea level."),
    ];
    ScriptedRun {
        name: "minimal",
        task: "What is the boiling point of water?".into(),
        replies,
        expected_answer: "Water boils at 100 °C (212 °F) at sea level.".into(),
        expected_files: vec![],
    }
}

/// A two-agent collaborative step, then the summary.
pub fn collaborative_run() -> ScriptedRun {
    let roles = vec![
        role("Story Planner", "a story planner who outlines plots", &[]),
        role("Researcher", "a researcher who checks facts", &[]),
        language_expert(),
    ];
    let plan = vec![
        step("Story Planner, Researcher", "Outline a factual story about the Moon landing."),
        final_step("Write a story about the Moon landing."),
    ];
    let replies = vec![
        planner_reply(&[], &roles, &plan),
        clean(),
        clean(),
        next_step(&plan[0]),
        action("Propose an outline", "Discuss", "Outline: launch, landing, first steps."),
        final_output("Outline agreed: launch on 16 July 1969, landing on 20 July, first steps by Armstrong."),
        next_step(&plan[1]),
        final_output("In July 1969 Apollo 11 launched, landed on 20 July, and Armstrong stepped onto the Moon."),
    ];
    ScriptedRun {
        name: "collaborative",
        task: "Write a story about the Moon landing.".into(),
        replies,
        expected_answer: "In July 1969 Apollo 11 launched, landed on 20 July, and Armstrong stepped onto the Moon.".into(),
        expected_files: vec![],
    }
}

/// Reprompts in drafting, a synthesized verification step, and a
/// self-corrected Write File.
pub fn recovery_run() -> ScriptedRun {
    let roles = vec![
        role("Writer", "a technical writer", &["Write File"]),
        role("Reviewer", "a reviewer who verifies documents", &[]),
        language_expert(),
    ];
    let plan = vec![
        step("Writer", "Write notes.md describing the project."),
        final_step("Describe the project."),
    ];
    let notes = "# Notes\n\nThe project has >>>markers<<< inside.\n<<<<< not a delimiter\n";
    let replies = vec![
        "I think we need a writer.".to_string(),
        planner_reply(&[], &roles, &plan),
        "Looks fine to me.".to_string(),
        clean(),
        clean(),
        next_step(&plan[0]),
        action("Write the notes", "Write File", ">>>notes.md<<<\nmissing the body delimiter"),
        write_file("notes.md", notes),
        final_output("notes.md written."),
        next_step("Reviewer: Re-verify that notes.md is accurate."),
        final_output("notes.md is accurate."),
        next_step(&plan[1]),
        final_output("The project is described in notes.md."),
    ];
    ScriptedRun {
        name: "recovery",
        task: "Describe the project.".into(),
        replies,
        expected_answer: "The project is described in notes.md.".into(),
        expected_files: vec![("notes.md".into(), notes.into())],
    }
}

pub fn all_runs() -> Vec<ScriptedRun> {
    vec![tetris_run(), trivia_run(), minimal_run(), collaborative_run(), recovery_run()]
}

pub fn test_config() -> RunConfig {
    RunConfig {
        retry_attempts: 1,
        ..RunConfig::default()
    }
}

pub fn client(backend: impl LlmBackend + 'static, tracer: &Tracer) -> Client {
    Client::new(Arc::new(backend))
        .with_retry(RetryPolicy::immediate(1))
        .with_tracer(tracer.clone())
}

pub struct Recorded {
    pub result: Result<RunOutcome, EngineError>,
    pub events: Vec<TraceEvent>,
    pub workspace: Workspace,
}

/// Runs `task` against `backend` with a file-backed trace at `trace_path`.
pub fn run_engine(
    backend: impl LlmBackend + 'static,
    config: RunConfig,
    task: &str,
    trace_path: &Path,
    workspace_root: &Path,
) -> Recorded {
    let tracer = Tracer::new(TraceRecorder::create(trace_path).expect("trace file"));
    let engine = Engine::new(client(backend, &tracer), config).expect("valid config");
    let mut workspace = Workspace::open(workspace_root).expect("workspace");
    let task = Task::new("t1", task).expect("task text");
    let result = engine.run(&task, &mut workspace);
    Recorded {
        result,
        events: tracer.snapshot(),
        workspace,
    }
}

pub fn run_scripted(run: &ScriptedRun, dir: &Path) -> Recorded {
    run_engine(
        ScriptedBackend::from_texts(run.replies.clone()),
        test_config(),
        &run.task,
        &dir.join(format!("{}.jsonl", run.name)),
        &dir.join(format!("{}-ws", run.name)),
    )
}

/// Replies chosen by request tag. Each tag's responder sees how many times
/// that tag was called before and the request.
pub struct RuleBackend {
    rules: Vec<(String, Box<dyn Fn(usize, &CompletionRequest) -> String + Send + Sync>)>,
    counts: Mutex<Vec<usize>>,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl RuleBackend {
    pub fn new() -> Self {
        Self {
            rules: Vec::new(),
            counts: Mutex::new(Vec::new()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn on(
        mut self,
        tag: &str,
        respond: impl Fn(usize, &CompletionRequest) -> String + Send + Sync + 'static,
    ) -> Self {
        self.rules.push((tag.to_string(), Box::new(respond)));
        self.counts.lock().unwrap().push(0);
        self
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl LlmBackend for RuleBackend {
    fn id(&self) -> &str {
        "rules"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        self.requests.lock().unwrap().push(request.clone());
        let i = self
            .rules
            .iter()
            .position(|(tag, _)| *tag == request.tag)
            .ok_or_else(|| ProviderError::InvalidScript(format!("no rule for {}", request.tag)))?;
        let n = {
            let mut counts = self.counts.lock().unwrap();
            counts[i] += 1;
            counts[i] - 1
        };
        Ok(CompletionResponse {
            text: (self.rules[i].1)(n, request),
            usage: None,
            backend_id: "rules".into(),
        })
    }
}

/// The first unfinished step listed in an action-observer prompt.
pub fn first_unfinished(request: &CompletionRequest) -> String {
    let text = &request.user_text;
    let start = text.find("## Unfinished Steps:").expect("states section");
    let line = text[start..]
        .lines()
        .nth(1)
        .expect("at least one unfinished step");
    let (_, rest) = line.split_once(". ").expect("numbered");
    rest.to_string()
}
