//! Role blob extraction from free-form planner output.
//!
//! Models are asked for one JSON object per role, but they wrap blobs in
//! prose and code fences, copy the trailing comma and curly quotes from the
//! example, or double the braces. The scanner tries a strict parse at every
//! `{`, falls back to a relaxed parse of the balanced span, and keeps any
//! object carrying one of the role keys.

use std::ops::Range;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::schema::AgentSpec;

pub const ROLE_KEYS: [&str; 5] = ["name", "description", "tools", "suggestions", "prompt"];

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BlobError {
    #[error("no-blobs-found")]
    NoBlobsFound,
    #[error("malformed-blob at bytes {span:?}: missing {missing:?}, invalid {invalid:?}")]
    MalformedBlob {
        span: Range<usize>,
        missing: Vec<String>,
        invalid: Vec<String>,
    },
}

/// Returns one spec per role blob, in document order.
pub fn extract_role_blobs(text: &str) -> Result<Vec<AgentSpec>, BlobError> {
    let mut specs = Vec::new();
    let mut cursor = 0;
    while let Some(found) = text[cursor..].find('{') {
        let start = cursor + found;
        match parse_object_at(text, start) {
            Some((object, end)) if is_candidate(&object) => {
                specs.push(to_spec(&object, start..end)?);
                cursor = end;
            }
            // not a role: keep scanning inside it for nested blobs
            _ => cursor = start + 1,
        }
    }
    if specs.is_empty() {
        return Err(BlobError::NoBlobsFound);
    }
    Ok(specs)
}

fn parse_object_at(text: &str, start: usize) -> Option<(Map<String, Value>, usize)> {
    let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
    if let Some(Ok(Value::Object(map))) = stream.next() {
        return Some((map, start + stream.byte_offset()));
    }
    let end = balanced_end(text, start)?;
    match serde_json::from_str::<Value>(&relax(&text[start..end])) {
        Ok(Value::Object(map)) => Some((map, end)),
        _ => None,
    }
}

fn is_quote(c: char) -> bool {
    matches!(c, '"' | '\u{201c}' | '\u{201d}')
}

/// End (exclusive) of the brace-balanced span starting at `start`,
/// treating straight and curly double quotes as string delimiters.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, c) in text[start..].char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if is_quote(c) {
                in_string = false;
            }
            continue;
        }
        match c {
            c if is_quote(c) => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(start + offset + c.len_utf8());
                }
            }
            _ => {}
        }
    }
    None
}

/// Straightens curly quotes, escapes raw newlines inside strings and drops
/// trailing commas.
fn relax(span: &str) -> String {
    let straightened: String = span
        .chars()
        .map(|c| if is_quote(c) { '"' } else { c })
        .collect();
    let chars: Vec<char> = straightened.chars().collect();
    let mut out = String::with_capacity(straightened.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            } else if c == '\n' {
                out.push_str("\\n");
                continue;
            }
            out.push(c);
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}' | ']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn is_candidate(object: &Map<String, Value>) -> bool {
    ROLE_KEYS.iter().any(|k| object.contains_key(*k))
}

fn scalar_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Null => Some(String::new()),
        Value::Array(items) => items
            .iter()
            .map(scalar_text)
            .collect::<Option<Vec<_>>>()
            .map(|v| v.join("\n")),
        Value::Object(_) => None,
    }
}

fn tool_list(value: &Value) -> Option<Vec<String>> {
    let raw: Vec<String> = match value {
        Value::Array(items) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Some(s.clone()),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?,
        Value::String(s) => s.split(',').map(str::to_string).collect(),
        Value::Null => Vec::new(),
        _ => return None,
    };
    Some(
        raw.into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
    )
}

fn to_spec(object: &Map<String, Value>, span: Range<usize>) -> Result<AgentSpec, BlobError> {
    let missing: Vec<String> = ROLE_KEYS
        .iter()
        .filter(|k| !object.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    let mut invalid = Vec::new();
    let mut text_field = |key: &str| {
        object
            .get(key)
            .and_then(|v| {
                let t = scalar_text(v);
                if t.is_none() {
                    invalid.push(key.to_string());
                }
                t
            })
            .unwrap_or_default()
    };
    let name = text_field("name");
    let description = text_field("description");
    let suggestions = text_field("suggestions");
    let prompt = text_field("prompt");
    let toolset = match object.get("tools").map(tool_list) {
        Some(Some(tools)) => tools,
        Some(None) => {
            invalid.push("tools".into());
            Vec::new()
        }
        None => Vec::new(),
    };
    if !missing.is_empty() || !invalid.is_empty() {
        return Err(BlobError::MalformedBlob {
            span,
            missing,
            invalid,
        });
    }
    Ok(AgentSpec::new(
        name.trim(),
        description.trim(),
        toolset,
        suggestions.trim(),
        prompt.trim(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LANG: &str = r#"{"name":"Language Expert","description":"summarizes results","tools":[],"suggestions":"be concise","prompt":"You are ..., named Language Expert. ..."}"#;

    #[test]
    fn single_bare_blob() {
        let specs = extract_role_blobs(&format!("Here you go:\n{LANG}\nThanks")).unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].name, "Language Expert");
        assert!(specs[0].toolset.is_empty());
    }

    #[test]
    fn missing_prompt_key_is_reported() {
        let text = r#"{"name":"X","description":"d","tools":[],"suggestions":"s"}"#;
        match extract_role_blobs(text) {
            Err(BlobError::MalformedBlob { missing, span, .. }) => {
                assert_eq!(missing, vec!["prompt"]);
                assert_eq!(span, 0..text.len());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fenced_and_relaxed_blobs() {
        let text = "```json\n{\n    \"name\": \u{201c}Tester\",\n    \"description\": \"tests\",\n    \"tools\": [\"Write File\"],\n    \"suggestions\": \"run it\",\n    \"prompt\": \"You are tests, named Tester.\",\n}\n```";
        let specs = extract_role_blobs(text).unwrap();
        assert_eq!(specs[0].name, "Tester");
        assert_eq!(specs[0].toolset, vec!["Write File"]);
    }

    #[test]
    fn doubled_braces_are_tolerated() {
        let text = format!("{{{LANG}}}");
        assert_eq!(extract_role_blobs(&text).unwrap().len(), 1);
    }

    #[test]
    fn nested_in_wrapper_object_or_list() {
        let text = format!("{{\"roles\": [{LANG}, {LANG}]}}");
        assert_eq!(extract_role_blobs(&text).unwrap().len(), 2);
    }

    #[test]
    fn unrelated_objects_and_braces_ignored() {
        let text = format!("use {{x}} and {{\"a\": 1}} then {LANG}");
        assert_eq!(extract_role_blobs(&text).unwrap().len(), 1);
        assert_eq!(extract_role_blobs("{} {\"a\":1} { nope"), Err(BlobError::NoBlobsFound));
    }

    #[test]
    fn raw_newline_inside_string() {
        let text = "{\"name\":\"A\",\"description\":\"d\",\"tools\":[],\"suggestions\":\"one\ntwo\",\"prompt\":\"p\"}";
        assert_eq!(extract_role_blobs(text).unwrap()[0].suggestions, "one\ntwo");
    }

    #[test]
    fn string_tools_are_split() {
        let text = r#"{"name":"A","description":"d","tools":"Write File, Final Output","suggestions":"s","prompt":"p"}"#;
        assert_eq!(
            extract_role_blobs(text).unwrap()[0].toolset,
            vec!["Write File", "Final Output"]
        );
    }
}
