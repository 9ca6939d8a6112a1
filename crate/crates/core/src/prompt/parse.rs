use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sections::{find_section, Occurrence};
use crate::schema::{tool_key, Critique, PlanStep};

/// Name of the terminal tool.
pub const FINAL_OUTPUT: &str = "Final Output";

const ACTION_SECTIONS: [&str; 5] = ["Thought", "Task", "CurrentStep", "Action", "ActionInput"];
const OBSERVER_SECTIONS: [&str; 4] = ["Thought", "NextStep", "RelevantHistory", "History"];

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("missing-suggestions-section")]
    MissingSuggestionsSection,
    #[error("missing-nextstep-section")]
    MissingNextStepSection,
    #[error("no-agent-named: the NextStep section must begin with the expert role name followed by a colon")]
    NoAgentNamed,
    #[error("missing-section: {0}")]
    MissingSection(&'static str),
    #[error("no-steps-found")]
    NoStepsFound,
    #[error("unnumbered-step at line {line}: {text}")]
    UnnumberedStep { line: usize, text: String },
    #[error("malformed-write-file: {0}")]
    MalformedWriteFile(&'static str),
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::MissingSuggestionsSection => "missing-suggestions-section",
            ParseError::MissingNextStepSection => "missing-nextstep-section",
            ParseError::NoAgentNamed => "no-agent-named",
            ParseError::MissingSection(_) => "missing-section",
            ParseError::NoStepsFound => "no-steps-found",
            ParseError::UnnumberedStep { .. } => "unnumbered-step",
            ParseError::MalformedWriteFile(_) => "malformed-write-file",
        }
    }
}

/// Reads the Suggestions section of an observer reply.
pub fn parse_critique(text: &str) -> Result<Critique, ParseError> {
    let body = find_section(text, "Suggestions", &[], Occurrence::Last, false)
        .ok_or(ParseError::MissingSuggestionsSection)?;
    Ok(Critique::from_body(body.trim()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextStepParse {
    pub agent_names: Vec<String>,
    pub step_text: String,
    /// Leading step number, when the observer wrote `3. Role: ...`.
    pub index_hint: Option<usize>,
    pub relevant_history: Option<String>,
}

impl NextStepParse {
    /// `Role A, Role B: text`.
    pub fn full_text(&self) -> String {
        format!("{}: {}", self.agent_names.join(", "), self.step_text)
    }
}

/// Reads the NextStep (and optional RelevantHistory) sections of an Action
/// Observer reply.
pub fn parse_next_step(text: &str) -> Result<NextStepParse, ParseError> {
    let body = find_section(text, "NextStep", &OBSERVER_SECTIONS, Occurrence::First, false)
        .ok_or(ParseError::MissingNextStepSection)?
        .trim();
    let (index_hint, body) = strip_step_number(body);
    let (names, rest) = body.split_once(':').ok_or(ParseError::NoAgentNamed)?;
    let agent_names = split_agent_list(names);
    if agent_names.is_empty() || names.contains('\n') {
        return Err(ParseError::NoAgentNamed);
    }
    let relevant_history = find_section(
        text,
        "RelevantHistory",
        &OBSERVER_SECTIONS,
        Occurrence::First,
        false,
    )
    .map(|s| s.trim().to_string())
    .filter(|s| !s.is_empty());
    Ok(NextStepParse {
        agent_names,
        step_text: rest.trim().to_string(),
        index_hint,
        relevant_history,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentActionParse {
    pub current_step: String,
    pub action: String,
    pub action_input: String,
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    UnknownAction(String),
}

/// Reads CurrentStep / Action / ActionInput. The ActionInput body runs to
/// the end of the reply and keeps its newlines.
pub fn parse_agent_action(text: &str) -> Result<AgentActionParse, ParseError> {
    let current_step = find_section(text, "CurrentStep", &ACTION_SECTIONS, Occurrence::First, false)
        .ok_or(ParseError::MissingSection("CurrentStep"))?;
    let action = find_section(text, "Action", &ACTION_SECTIONS, Occurrence::First, false)
        .ok_or(ParseError::MissingSection("Action"))?;
    let action_input = find_section(text, "ActionInput", &[], Occurrence::First, true)
        .ok_or(ParseError::MissingSection("ActionInput"))?;

    let action = clean_action_name(action);
    let action_input = action_input.trim_end_matches(['\n', '\r']).to_string();
    Ok(AgentActionParse {
        current_step: current_step.trim().to_string(),
        is_final: tool_key(&action) == tool_key(FINAL_OUTPUT),
        action,
        action_input,
    })
}

/// The optional Thought section of an agent reply.
pub fn parse_thought(text: &str) -> String {
    find_section(text, "Thought", &ACTION_SECTIONS, Occurrence::First, false)
        .map(|s| s.trim().to_string())
        .unwrap_or_default()
}

/// Flags an Action naming no registered tool. Not an error: the toolkit
/// turns the call into an `unknown-tool` observation.
pub fn check_action(parse: &AgentActionParse, registered: &[String]) -> Option<ParseWarning> {
    let key = tool_key(&parse.action);
    (!registered.iter().any(|t| tool_key(t) == key))
        .then(|| ParseWarning::UnknownAction(parse.action.clone()))
}

fn clean_action_name(raw: &str) -> String {
    let first = raw.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    first
        .trim()
        .trim_matches(|c: char| matches!(c, '`' | '"' | '\'' | '[' | ']' | '*' | '.'))
        .trim()
        .to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteFilePayload {
    pub file_name: String,
    pub content: String,
}

fn line_body(line: &str) -> &str {
    line.trim_end_matches(['\n', '\r'])
}

/// Parses the Write File grammar:
///
/// ```text
/// >>>NAME<<<
/// >>>>>
/// content lines
/// <<<<<
/// ```
///
/// Lines before the name line are ignored. The content ends at the last
/// full `<<<<<` line, so delimiter-like text inside the content survives.
pub fn parse_write_file_payload(action_input: &str) -> Result<WriteFilePayload, ParseError> {
    let mut lines = Vec::new();
    let mut offset = 0;
    for line in action_input.split_inclusive('\n') {
        lines.push((offset, line));
        offset += line.len();
    }

    let is_name_line = |l: &str| {
        let t = line_body(l).trim();
        t.len() >= 7 && t.starts_with(">>>") && t.ends_with("<<<") && t != ">>>>>"
    };
    let is_open = |l: &str| line_body(l).trim() == ">>>>>";
    let is_close = |l: &str| line_body(l).trim_end() == "<<<<<";

    let name_at = (0..lines.len())
        .find(|&i| is_name_line(lines[i].1) && lines.get(i + 1).is_some_and(|(_, l)| is_open(l)));
    let name_at = match name_at {
        Some(i) => i,
        None => {
            return Err(if lines.iter().any(|(_, l)| is_name_line(l)) {
                ParseError::MalformedWriteFile("missing '>>>>>' line after the file name")
            } else {
                ParseError::MalformedWriteFile("missing '>>>file name<<<' line")
            })
        }
    };
    let name_line = line_body(lines[name_at].1).trim();
    let file_name = name_line[3..name_line.len() - 3].trim().to_string();
    if file_name.is_empty() {
        return Err(ParseError::MalformedWriteFile("empty file name"));
    }

    let open = name_at + 1;
    let content_start = lines[open].0 + lines[open].1.len();
    let close = (open + 1..lines.len())
        .rev()
        .find(|&i| is_close(lines[i].1))
        .ok_or(ParseError::MalformedWriteFile("missing closing '<<<<<' line"))?;
    let close_start = lines[close].0;
    // drop the newline that ends the last content line
    let mut content_end = close_start;
    if content_end > content_start {
        content_end -= 1;
    }
    Ok(WriteFilePayload {
        file_name,
        content: action_input[content_start..content_end.max(content_start)].to_string(),
    })
}

/// Parses a numbered list of plan steps.
pub fn parse_plan_steps(text: &str) -> Result<Vec<PlanStep>, ParseError> {
    let items = numbered_items(text);
    if items.is_empty() {
        if let Some((i, line)) = text
            .lines()
            .enumerate()
            .find(|(_, l)| is_bullet(l.trim_start()))
        {
            return Err(ParseError::UnnumberedStep {
                line: i + 1,
                text: line.trim().to_string(),
            });
        }
        return Err(ParseError::NoStepsFound);
    }
    Ok(items
        .into_iter()
        .enumerate()
        .map(|(i, item)| step_from_item(i + 1, &item))
        .collect())
}

fn is_bullet(line: &str) -> bool {
    let mut chars = line.chars();
    matches!(chars.next(), Some('-' | '*' | '+' | '•')) && matches!(chars.next(), Some(' ' | '\t'))
}

/// Leading `N.` / `N)` followed by whitespace. Returns (number, byte length
/// of the marker including trailing whitespace).
fn number_marker(s: &str) -> Option<(usize, usize)> {
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || digits > 4 {
        return None;
    }
    let bytes = s.as_bytes();
    if !matches!(bytes.get(digits), Some(b'.' | b')')) {
        return None;
    }
    let after = &s[digits + 1..];
    let ws = after.len() - after.trim_start().len();
    if ws == 0 || after.trim_start().is_empty() {
        return None;
    }
    Some((s[..digits].parse().ok()?, digits + 1 + ws))
}

/// Splits text into numbered item bodies. A line-leading number always
/// starts an item; mid-line only the next sequential number does.
fn numbered_items(text: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut expected = 1usize;
    for line in text.lines() {
        let trimmed = line.trim_start();
        let trimmed = trimmed.strip_prefix("**").unwrap_or(trimmed);
        let mut rest: &str = match number_marker(trimmed) {
            Some((n, len)) => {
                items.push(String::new());
                expected = n + 1;
                &trimmed[len..]
            }
            None if items.is_empty() => continue,
            None => {
                let last = items.last_mut().expect("non-empty");
                if !trimmed.trim().is_empty() {
                    last.push('\n');
                }
                line.trim()
            }
        };
        // split inline `... 2. next step` runs
        loop {
            let marker = format!("{expected}.");
            let split = rest.match_indices(&marker).find(|(pos, _)| {
                let before_ws = rest[..*pos].ends_with(char::is_whitespace);
                before_ws && number_marker(&rest[*pos..]).is_some_and(|(n, _)| n == expected)
            });
            match split {
                Some((pos, _)) => {
                    let (_, len) = number_marker(&rest[pos..]).expect("checked");
                    items.last_mut().expect("non-empty").push_str(rest[..pos].trim_end());
                    items.push(String::new());
                    expected += 1;
                    rest = &rest[pos + len..];
                }
                None => {
                    items.last_mut().expect("non-empty").push_str(rest);
                    break;
                }
            }
        }
    }
    items
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn step_from_item(index: usize, item: &str) -> PlanStep {
    let (agents, description) = match item.split_once(':') {
        Some((head, tail)) if !head.contains('\n') => (split_agent_list(head), tail.trim()),
        _ => (Vec::new(), item.trim()),
    };
    let (expected_output, required_inputs) = extract_io(description);
    PlanStep {
        index,
        assigned_agents: agents,
        description: description.to_string(),
        expected_output,
        required_inputs,
    }
}

fn split_agent_list(head: &str) -> Vec<String> {
    let head = head
        .trim()
        .trim_matches(|c: char| matches!(c, '[' | ']' | '*' | '`'))
        .trim();
    head.split(',')
        .map(|s| {
            s.trim()
                .trim_matches(|c: char| matches!(c, '[' | ']' | '*' | '`' | '"' | '\''))
                .trim()
                .to_string()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Byte position of a case-insensitive ASCII phrase at a word boundary.
fn find_phrase(haystack: &str, phrase: &str) -> Option<usize> {
    let lower = haystack.to_ascii_lowercase();
    let mut from = 0;
    while let Some(pos) = lower[from..].find(phrase) {
        let at = from + pos;
        let before_ok = lower[..at]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        if before_ok {
            return Some(at);
        }
        from = at + phrase.len();
    }
    None
}

fn extract_io(description: &str) -> (String, String) {
    let out_pos = find_phrase(description, "expected output");
    let in_pos = find_input_marker(description, out_pos);

    let segment = |start: usize, marker_len: usize, stop: Option<usize>| -> String {
        let body = &description[start + marker_len..];
        let body = body.trim_start_matches(['s', 'S']);
        let body = body.trim_start_matches(|c: char| c == ':' || c.is_whitespace());
        let consumed = description.len() - body.len();
        let end = stop.filter(|&s| s > consumed).unwrap_or(description.len());
        description[consumed.min(end)..end].trim().to_string()
    };

    let expected = out_pos
        .map(|p| segment(p, "expected output".len(), in_pos.map(|(i, _)| i).filter(|&i| i > p)))
        .unwrap_or_default();
    let inputs = in_pos
        .map(|(p, len)| {
            let stop = out_pos.filter(|&o| o > p);
            segment(p, len, stop)
        })
        .unwrap_or_default();
    (expected, inputs)
}

/// Finds an `input`/`inputs` marker followed by a colon within a short
/// window, e.g. `Input:` or `Required inputs for the next step:`.
fn find_input_marker(description: &str, out_pos: Option<usize>) -> Option<(usize, usize)> {
    let lower = description.to_ascii_lowercase();
    let mut from = 0;
    while let Some(pos) = lower[from..].find("input") {
        let at = from + pos;
        from = at + 5;
        let before_ok = lower[..at]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        if !before_ok || out_pos.is_some_and(|o| at > o && at < o + "expected output".len()) {
            continue;
        }
        let window: String = lower[at..].chars().take(48).collect();
        if let Some(colon) = window.find(':') {
            if !window[..colon].contains(['.', '\n']) {
                // start the marker at a preceding "required " if present
                let start = lower[..at]
                    .strip_suffix("required ")
                    .map(|s| s.len())
                    .unwrap_or(at);
                return Some((start, at - start + colon));
            }
        }
    }
    None
}

fn strip_step_number(body: &str) -> (Option<usize>, &str) {
    let lower = body.to_ascii_lowercase();
    let body_after_word = if lower.starts_with("step ") { &body[5..] } else { body };
    let digits = body_after_word.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || digits > 4 {
        return (None, body);
    }
    let rest = &body_after_word[digits..];
    let Some(stripped) = rest.strip_prefix(['.', ')', ':']) else {
        return (None, body);
    };
    (body_after_word[..digits].parse().ok(), stripped.trim_start())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Verdict;

    #[test]
    fn critique_no_suggestions() {
        let c = parse_critique("# Thought\nall good\n# Suggestions\nNo Suggestions").unwrap();
        assert_eq!(c.verdict, Verdict::NoSuggestions);
    }

    #[test]
    fn critique_with_suggestions() {
        let c = parse_critique("...\n# Suggestions\nAdd a testing expert.").unwrap();
        assert_eq!(c.verdict, Verdict::HasSuggestions);
        assert_eq!(c.body, "Add a testing expert.");
    }

    #[test]
    fn critique_without_header() {
        assert_eq!(
            parse_critique("looks fine to me"),
            Err(ParseError::MissingSuggestionsSection)
        );
    }

    #[test]
    fn next_step_single_agent() {
        let p = parse_next_step("NextStep: Programmer: implement tetris.py per the design doc").unwrap();
        assert_eq!(p.agent_names, vec!["Programmer"]);
        assert_eq!(p.step_text, "implement tetris.py per the design doc");
    }

    #[test]
    fn next_step_with_history_and_number() {
        let text = "## Thought\nnext is testing\n## NextStep\n4. [Testing Expert, Programmer]: test the game\n## RelevantHistory\nstep 3 wrote tetris.py\n";
        let p = parse_next_step(text).unwrap();
        assert_eq!(p.index_hint, Some(4));
        assert_eq!(p.agent_names, vec!["Testing Expert", "Programmer"]);
        assert_eq!(p.step_text, "test the game");
        assert_eq!(p.relevant_history.as_deref(), Some("step 3 wrote tetris.py"));
    }

    #[test]
    fn next_step_errors() {
        assert_eq!(parse_next_step("NextStep: finish everything"), Err(ParseError::NoAgentNamed));
        assert_eq!(parse_next_step("I think we are done."), Err(ParseError::MissingNextStepSection));
    }

    #[test]
    fn agent_action_final() {
        let text = "## CurrentStep\nsummarize\n## Action\nFinal Output\n## ActionInput\nsummary...\nline two\n";
        let a = parse_agent_action(text).unwrap();
        assert!(a.is_final);
        assert_eq!(a.action_input, "summary...\nline two");
        assert_eq!(a.current_step, "summarize");
    }

    #[test]
    fn agent_action_write_file() {
        let text = "CurrentStep: write code\nAction: Write File\nActionInput:\n>>>a.py<<<\n>>>>>\n# comment\nprint(1)\n<<<<<\n";
        let a = parse_agent_action(text).unwrap();
        assert!(!a.is_final);
        assert_eq!(a.action, "Write File");
        let payload = parse_write_file_payload(&a.action_input).unwrap();
        assert_eq!(payload.content, "# comment\nprint(1)");
    }

    #[test]
    fn agent_action_missing_input() {
        assert_eq!(
            parse_agent_action("CurrentStep: x\nAction: Final Output\n"),
            Err(ParseError::MissingSection("ActionInput"))
        );
        assert_eq!(
            parse_agent_action("Action: Final Output\nActionInput: y"),
            Err(ParseError::MissingSection("CurrentStep"))
        );
    }

    #[test]
    fn action_name_cleanup_and_warning() {
        let a = parse_agent_action("CurrentStep: x\nAction: `final output`\nActionInput: y").unwrap();
        assert!(a.is_final);
        let registry = vec!["Write File".to_string(), "Final Output".to_string()];
        assert_eq!(check_action(&a, &registry), None);
        let b = parse_agent_action("CurrentStep: x\nAction: Search\nActionInput: y").unwrap();
        assert_eq!(
            check_action(&b, &registry),
            Some(ParseWarning::UnknownAction("Search".into()))
        );
    }

    #[test]
    fn write_file_basic() {
        let p = parse_write_file_payload(">>>tetris.py<<<\n>>>>>\nprint('hi')\n<<<<<").unwrap();
        assert_eq!(p.file_name, "tetris.py");
        assert_eq!(p.content, "print('hi')");
    }

    #[test]
    fn write_file_missing_close() {
        assert_eq!(
            parse_write_file_payload(">>>a<<<\n>>>>>\nx\n"),
            Err(ParseError::MalformedWriteFile("missing closing '<<<<<' line"))
        );
        assert!(parse_write_file_payload("just text").is_err());
        assert!(parse_write_file_payload(">>>a<<<\nx\n<<<<<").is_err());
    }

    #[test]
    fn write_file_interior_delimiters_survive() {
        let content = "a >>> b\n>>>x<<<\n<<<<< not alone\nend";
        let text = format!(">>>f.txt<<<\n>>>>>\n{content}\n<<<<<");
        let p = parse_write_file_payload(&text).unwrap();
        assert_eq!(p.content, content);
    }

    #[test]
    fn write_file_inside_fence() {
        let text = "```\n>>>notes.md<<<\n>>>>>\nhello\n<<<<<\n```";
        let p = parse_write_file_payload(text).unwrap();
        assert_eq!((p.file_name.as_str(), p.content.as_str()), ("notes.md", "hello"));
    }

    #[test]
    fn plan_two_steps() {
        let text = "1. Researcher: gather facts. Expected output: fact list.\n2. Language Expert: Based on the previous steps, please respond to the user's original question: X";
        let steps = parse_plan_steps(text).unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].assigned_agents, vec!["Researcher"]);
        assert_eq!(steps[0].expected_output, "fact list.");
        assert_eq!(steps[1].assigned_agents, vec!["Language Expert"]);
        assert!(steps[1].has_final_marker());
    }

    #[test]
    fn plan_inline_numbering_and_agent_lists() {
        let steps =
            parse_plan_steps("1. A, B: co-design the level. 2. Language Expert: ... question: X").unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].assigned_agents, vec!["A", "B"]);
        assert_eq!(steps[0].description, "co-design the level.");
        assert_eq!(steps[1].description, "... question: X");
    }

    #[test]
    fn plan_bracketed_agents_and_continuations() {
        let text = "Plan:\n1. [Game Design Expert]: write rules\n   - include scoring\n2. [Language Expert]: Based on the previous steps, respond";
        let steps = parse_plan_steps(text).unwrap();
        assert_eq!(steps[0].assigned_agents, vec!["Game Design Expert"]);
        assert_eq!(steps[0].description, "write rules\n- include scoring");
    }

    #[test]
    fn plan_errors() {
        assert_eq!(parse_plan_steps("First do X"), Err(ParseError::NoStepsFound));
        assert!(matches!(
            parse_plan_steps("- do X\n- do Y"),
            Err(ParseError::UnnumberedStep { line: 1, .. })
        ));
    }

    #[test]
    fn plan_io_markers() {
        let steps = parse_plan_steps(
            "1. Writer: draft story. Expected output: a draft. Required inputs: the facts from step 1",
        )
        .unwrap();
        assert_eq!(steps[0].expected_output, "a draft.");
        assert_eq!(steps[0].required_inputs, "the facts from step 1");
    }

    #[test]
    fn plan_does_not_split_on_unrelated_numbers() {
        let steps = parse_plan_steps("1. Historian: summarize events of 1969. Then 3. things").unwrap();
        assert_eq!(steps.len(), 1);
    }
}
