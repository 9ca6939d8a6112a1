//! Input generators shared by the benchmarks.

use teamsmith_core::execution::{RefinementAction, StepOutcome, StepResult};
use teamsmith_core::memory::MemoryStore;
use teamsmith_core::prompt::format_write_file_payload;
use teamsmith_core::AgentSpec;

/// `n` specialist roles plus a language expert.
pub fn roles(n: usize) -> Vec<AgentSpec> {
    let mut roles: Vec<AgentSpec> = (0..n)
        .map(|i| {
            let name = format!("Specialist {i}");
            let description = format!("an expert in area {i}");
            AgentSpec::new(
                name.clone(),
                description.clone(),
                vec!["Write File".into()],
                "Check the output against the task.",
                format!("You are {description}, named {name}. Work carefully."),
            )
        })
        .collect();
    roles.push(AgentSpec::new(
        "Language Expert",
        "a language expert",
        vec![],
        "Be concise.",
        "You are a language expert, named Language Expert.",
    ));
    roles
}

/// A planner reply with `n` created roles and one step per role.
pub fn planner_reply(n: usize) -> String {
    let roles = roles(n);
    let blobs: Vec<String> = roles.iter().map(AgentSpec::to_blob).collect();
    let mut plan: Vec<String> = (0..n)
        .map(|i| format!("{}. Specialist {i}: Handle part {i} of the task.", i + 1))
        .collect();
    plan.push(format!(
        "{}. Language Expert: Based on the previous steps, answer the question.",
        n + 1
    ));
    format!(
        "## Thought\nPlanning.\n\n## Selected Roles List:\nNone\n\n## Created Roles List:\n```\n{}\n```\n\n## Execution Plan:\n{}\n\n## RoleFeedback\nnone\n\n## PlanFeedback\nnone\n",
        blobs.join(",\n"),
        plan.join("\n")
    )
}

/// A custom-agent reply whose Write File payload is `size` bytes.
pub fn write_file_reply(size: usize) -> String {
    let line = "def tick(board):  # <<<<< not a delimiter\n";
    let content: String = line.repeat(size / line.len() + 1)[..size].to_string();
    format!(
        "## Thought\nWriting.\n\n## CurrentStep\nWrite main.py\n\n## Action\nWrite File\n\n## ActionInput\n{}",
        format_write_file_payload("main.py", &content)
    )
}

/// A store holding `steps` completed steps, each with `actions` actions for
/// one of three agents.
pub fn populated_store(steps: usize, actions: usize) -> MemoryStore {
    let agents = ["Alpha", "Beta", "Gamma"];
    let mut store = MemoryStore::new();
    for step in 1..=steps {
        let agent = agents[step % agents.len()];
        for i in 1..=actions {
            store.append_short_term(
                agent,
                step,
                &RefinementAction {
                    iteration: i as u32,
                    agent: agent.into(),
                    thought: format!("thinking about step {step} iteration {i}"),
                    plan: format!("do part {i}"),
                    tool_used: "Write File".into(),
                    action_input: String::new(),
                    observation: "wrote file.txt (120 bytes)".repeat(3),
                },
            );
        }
        store.append_summary(agent, step, &format!("summary of step {step}"));
        store
            .commit_long_term(&StepResult {
                step_index: step,
                step_text: format!("{agent}: step {step}"),
                agents: vec![agent.into()],
                actions: vec![],
                final_output: format!("result of step {step} ").repeat(10),
                status: StepOutcome::Completed,
            })
            .expect("completed steps commit");
    }
    store
}
