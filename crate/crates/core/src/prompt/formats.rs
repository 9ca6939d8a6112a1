//! Reply format examples bound to `{format_example}`.
//!
//! These are engine-defined. Each one names exactly the sections the
//! matching parser reads.

use super::PromptKind;

const PLANNER: &str = "---
## Thought
If you do not receive any suggestions, think about which expert roles are required and what the essential steps to complete the task are.
If you do receive suggestions, think about how to improve the previous role list and execution plan according to them.

## Question or Task:
the input question you must answer / the input task you must finish

## Selected Roles List:
```
JSON BLOB 1,
JSON BLOB 2
```

## Created Roles List:
```
JSON BLOB 1,
JSON BLOB 2
```

## Execution Plan:
1. ROLE 1, ROLE 2: STEP 1
2. ROLE 1: STEP 2
3. Language Expert: Based on the previous steps, please provide a helpful, relevant, accurate, and detailed response to the user's original question: XXX

## RoleFeedback
feedback on the historical role suggestions

## PlanFeedback
feedback on the historical plan suggestions
---";

const AGENT_OBSERVER: &str = "---
## Thought
you should always think about whether the selected and created expert roles have errors or need improvement.

## Suggestions
1. ERROR OR SUGGESTION 1
2. ERROR OR SUGGESTION 2
(write 'No Suggestions' when there is nothing to improve)
---";

const PLAN_OBSERVER: &str = "---
## Thought
you should always think about whether the execution plan has errors or needs improvement.

## Suggestions
1. ERROR OR SUGGESTION 1
2. ERROR OR SUGGESTION 2
(write 'No Suggestions' when there is nothing to improve)
---";

const ACTION_OBSERVER: &str = "## Thought
you should always think about which step should be performed next and which expert role should perform it.

## NextStep
EXPERT ROLE NAME: the complete text of the selected step

## RelevantHistory
the relevant historical information for the next step, copied without changes";

const CUSTOM_AGENT_HEAD: &str = "## Thought
you should always think about what step you need to complete now and how to complete this step.

## Task
the input task you must finish

## CurrentStep
the current step to be completed

## Action
the action to take, must be one of [";

const CUSTOM_AGENT_TAIL: &str = "]

## ActionInput
the input to the action";

/// Format example for a prompt kind. `tools` is only used by the custom
/// agent example, which lists the agent's permitted actions.
pub fn format_example(kind: PromptKind, tools: &[String]) -> String {
    match kind {
        PromptKind::Planner => PLANNER.to_string(),
        PromptKind::AgentObserver => AGENT_OBSERVER.to_string(),
        PromptKind::PlanObserver => PLAN_OBSERVER.to_string(),
        PromptKind::ActionObserver => ACTION_OBSERVER.to_string(),
        PromptKind::CustomAgent => {
            format!("{CUSTOM_AGENT_HEAD}{}{CUSTOM_AGENT_TAIL}", tools.join(", "))
        }
    }
}

/// Inverse of [`super::parse_write_file_payload`] for newline-free names.
pub fn format_write_file_payload(file_name: &str, content: &str) -> String {
    format!(">>>{file_name}<<<\n>>>>>\n{content}\n<<<<<")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{parse_agent_action, parse_critique, parse_next_step};

    #[test]
    fn examples_name_the_parsed_sections() {
        assert!(parse_critique(&format_example(PromptKind::AgentObserver, &[])).is_ok());
        assert!(parse_critique(&format_example(PromptKind::PlanObserver, &[])).is_ok());
        assert!(parse_next_step(&format_example(PromptKind::ActionObserver, &[])).is_ok());
        let tools = vec!["Write File".to_string(), "Final Output".to_string()];
        let custom = format_example(PromptKind::CustomAgent, &tools);
        assert!(custom.contains("[Write File, Final Output]"));
        assert!(parse_agent_action(&custom).is_ok());
    }
}
