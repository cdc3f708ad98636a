//! Indentation-based `key: value` documents, the syntax used by policy and
//! scenario files:
//!
//! ```text
//! policy: media_v2
//! quorum:
//!     k: 3
//!     n: 4
//! ```
//!
//! Blank lines and lines whose first non-space character is `#` are
//! ignored. Indentation is spaces only; all children of a section share
//! one indentation width. Keys are unique within a section.

use crate::error::PolicyError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(String),
    Section(Section),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub entries: Vec<Entry>,
}

struct Line<'a> {
    number: usize,
    indent: usize,
    key: &'a str,
    value: Option<&'a str>,
}

fn syntax(line: usize, message: impl Into<String>) -> PolicyError {
    PolicyError::Syntax {
        line,
        message: message.into(),
    }
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

fn tokenize(text: &str) -> Result<Vec<Line<'_>>, PolicyError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let trimmed = raw.trim_end();
        let content = trimmed.trim_start_matches(' ');
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        if content.starts_with('\t') || trimmed[..trimmed.len() - content.len()].contains('\t') {
            return Err(syntax(number, "tab indentation is not allowed"));
        }
        let indent = trimmed.len() - content.len();
        let Some((key, rest)) = content.split_once(':') else {
            return Err(syntax(number, "expected `key: value` or `key:`"));
        };
        let key = key.trim_end();
        if !valid_key(key) {
            return Err(syntax(number, format!("invalid key `{key}`")));
        }
        let value = if rest.is_empty() {
            None
        } else if let Some(v) = rest.strip_prefix(' ') {
            let v = v.trim();
            if v.is_empty() {
                None
            } else {
                Some(v)
            }
        } else {
            return Err(syntax(number, "expected a space after `:`"));
        };
        lines.push(Line {
            number,
            indent,
            key,
            value,
        });
    }
    Ok(lines)
}

fn parse_section(lines: &[Line<'_>], pos: &mut usize, indent: usize) -> Result<Section, PolicyError> {
    let mut section = Section::default();
    while *pos < lines.len() {
        let line = &lines[*pos];
        if line.indent < indent {
            break;
        }
        if line.indent > indent {
            return Err(syntax(line.number, "unexpected indentation"));
        }
        if section.entries.iter().any(|e| e.key == line.key) {
            return Err(syntax(line.number, format!("duplicate key `{}`", line.key)));
        }
        *pos += 1;
        let value = match line.value {
            Some(v) => Value::Scalar(v.to_string()),
            None => {
                let child_indent = match lines.get(*pos) {
                    Some(next) if next.indent > indent => next.indent,
                    _ => return Err(syntax(line.number, format!("section `{}` is empty", line.key))),
                };
                Value::Section(parse_section(lines, pos, child_indent)?)
            }
        };
        section.entries.push(Entry {
            key: line.key.to_string(),
            value,
            line: line.number,
        });
    }
    Ok(section)
}

pub fn parse(text: &str) -> Result<Section, PolicyError> {
    let lines = tokenize(text)?;
    let mut pos = 0;
    let base = lines.first().map_or(0, |l| l.indent);
    if base != 0 {
        return Err(syntax(lines[0].number, "top-level keys must not be indented"));
    }
    let section = parse_section(&lines, &mut pos, 0)?;
    if let Some(line) = lines.get(pos) {
        return Err(syntax(line.number, "unexpected indentation"));
    }
    Ok(section)
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn scalar(&self, key: &str) -> Result<Option<&str>, PolicyError> {
        match self.get(key) {
            None => Ok(None),
            Some(Entry { value: Value::Scalar(s), .. }) => Ok(Some(s)),
            Some(e) => Err(syntax(e.line, format!("`{key}` must be a value, not a section"))),
        }
    }

    pub fn section(&self, key: &str) -> Result<Option<&Section>, PolicyError> {
        match self.get(key) {
            None => Ok(None),
            Some(Entry { value: Value::Section(s), .. }) => Ok(Some(s)),
            Some(e) => Err(syntax(e.line, format!("`{key}` must be a section"))),
        }
    }

    /// Rejects any key outside `allowed`; `path` prefixes the reported key.
    pub fn deny_unknown(&self, allowed: &[&str], path: &str) -> Result<(), PolicyError> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(PolicyError::UnknownKey(join(path, &e.key))),
            None => Ok(()),
        }
    }

    pub fn push_scalar(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push(Entry {
            key: key.to_string(),
            value: Value::Scalar(value.into()),
            line: 0,
        });
    }

    pub fn push_section(&mut self, key: &str, section: Section) {
        self.entries.push(Entry {
            key: key.to_string(),
            value: Value::Section(section),
            line: 0,
        });
    }

    /// Renders with four-space indentation per level.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize) {
        for e in &self.entries {
            out.push_str(&" ".repeat(depth * 4));
            out.push_str(&e.key);
            match &e.value {
                Value::Scalar(s) => {
                    out.push_str(": ");
                    out.push_str(s);
                    out.push('\n');
                }
                Value::Section(s) => {
                    out.push_str(":\n");
                    s.render_into(out, depth + 1);
                }
            }
        }
    }
}

pub fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Parses a number with an optional unit suffix (`20m`, `2s`, `0.7`).
pub fn number_with_unit(text: &str, unit: &str) -> Option<f64> {
    let t = text.trim();
    let t = t.strip_suffix(unit).unwrap_or(t).trim_end();
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Shortest round-trip text of a float, with the given unit suffix.
pub fn format_number(v: f64, unit: &str) -> String {
    format!("{v}{unit}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
policy: media_v2
zone_id: Z-17
quorum:
    k: 3
    n: 4
requirements:
    distance_bound:
        max_distance: 20m
    audio_hash_match: true
on_fail: reject
";

    #[test]
    fn parses_nested_sections() {
        let doc = parse(SAMPLE).unwrap();
        assert_eq!(doc.scalar("policy").unwrap(), Some("media_v2"));
        let q = doc.section("quorum").unwrap().unwrap();
        assert_eq!(q.scalar("k").unwrap(), Some("3"));
        let req = doc.section("requirements").unwrap().unwrap();
        let db = req.section("distance_bound").unwrap().unwrap();
        assert_eq!(db.scalar("max_distance").unwrap(), Some("20m"));
        assert_eq!(req.scalar("audio_hash_match").unwrap(), Some("true"));
    }

    #[test]
    fn render_round_trips() {
        let doc = parse(SAMPLE).unwrap();
        assert_eq!(doc.render(), SAMPLE);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let doc = parse("# header\n\na: 1\n   # indented comment\nb: 2\n").unwrap();
        assert_eq!(doc.entries.len(), 2);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let cases = [
            ("a: 1\n  b: 2\n", 2),
            ("a 1\n", 1),
            ("a:\nb: 1\n", 1),
            ("a: 1\na: 2\n", 2),
            ("a:\n\tb: 1\n", 2),
            ("  a: 1\n", 1),
            ("a:1\n", 1),
            ("q:\n    k: 1\n  n: 2\n", 3),
        ];
        for (text, line) in cases {
            match parse(text) {
                Err(PolicyError::Syntax { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn units() {
        assert_eq!(number_with_unit("20m", "m"), Some(20.0));
        assert_eq!(number_with_unit("2s", "s"), Some(2.0));
        assert_eq!(number_with_unit("0.70", "m"), Some(0.7));
        assert_eq!(number_with_unit("twenty", "m"), None);
        assert_eq!(number_with_unit("inf", ""), None);
        assert_eq!(format_number(20.0, "m"), "20m");
        assert_eq!(format_number(0.7, ""), "0.7");
    }
}
