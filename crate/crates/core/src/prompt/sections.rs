//! Section headers in model output.
//!
//! A header is a line of optional `#` marks followed by a section name,
//! optionally bold, optionally followed by a colon and inline content. Names
//! compare case-insensitively with spaces, underscores and hyphens ignored,
//! so `## Next Step:` and `NextStep` are the same header.

/// Which matching header to use when a name appears more than once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occurrence {
    First,
    Last,
}

pub(crate) fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, '_' | '-' | '*' | '`'))
        .flat_map(char::to_lowercase)
        .collect()
}

struct Header {
    name: String,
    /// Offset of inline content within the line, if any follows a colon.
    inline: Option<usize>,
}

fn parse_header(line: &str) -> Option<Header> {
    let content = line.trim_end_matches(['\n', '\r']);
    let lead = content.len() - content.trim_start().len();
    let mut pos = lead;
    let rest = &content[pos..];
    let hashes = rest.len() - rest.trim_start_matches('#').len();
    pos += hashes;
    let head_part = &content[pos..];
    let (name_part, inline) = match head_part.find(':') {
        Some(colon) => {
            let mut after = pos + colon + 1;
            // `**Name:**` puts the closing bold after the colon
            let tail = &content[after..];
            after += tail.len() - tail.trim_start_matches('*').len();
            (&head_part[..colon], Some(after))
        }
        None => (head_part, None),
    };
    let name = normalize_name(name_part);
    if name.is_empty() || name.len() > 40 {
        return None;
    }
    Some(Header { name, inline })
}

fn is_hash_line(line: &str) -> bool {
    line.trim_start().starts_with('#')
}

/// Finds the body of section `name`.
///
/// The body starts after the header (inline content included) and ends at
/// the next `#` line or the next header naming any of `siblings`, or at the
/// end of the text when `to_end` is set.
pub fn find_section<'a>(
    text: &'a str,
    name: &str,
    siblings: &[&str],
    occurrence: Occurrence,
    to_end: bool,
) -> Option<&'a str> {
    let wanted = normalize_name(name);
    let stops: Vec<String> = siblings
        .iter()
        .map(|s| normalize_name(s))
        .chain(std::iter::once(wanted.clone()))
        .collect();

    let mut lines = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        lines.push((offset, line));
        offset += line.len();
    }

    let mut found = None;
    for (i, (_, line)) in lines.iter().enumerate() {
        if let Some(h) = parse_header(line) {
            if h.name == wanted {
                found = Some((i, h));
                if occurrence == Occurrence::First {
                    break;
                }
            }
        }
    }
    let (index, header) = found?;
    let (line_start, line) = lines[index];

    let start = match header.inline {
        Some(inline) if !line[inline..].trim().is_empty() => {
            let content = &line[inline..];
            line_start + inline + (content.len() - content.trim_start_matches([' ', '\t']).len())
        }
        _ => line_start + line.len(),
    };
    if to_end {
        return Some(&text[start..]);
    }
    let end = lines[index + 1..]
        .iter()
        .find(|(_, l)| {
            is_hash_line(l) || parse_header(l).is_some_and(|h| stops.contains(&h.name))
        })
        .map(|(o, _)| *o)
        .unwrap_or(text.len());
    Some(&text[start..end.max(start)])
}
