//! Line-delimited structured records: `kind key=value key="quoted value"`.
//!
//! Field order is the order of insertion, so identical runs print identical
//! bytes. Values are quoted when empty or when they contain whitespace,
//! quotes, backslashes or `=`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRecord {
    pub kind: String,
    pub fields: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad report record: {0}")]
pub struct RecordParseError(pub String);

impl ReportRecord {
    pub fn new(kind: &str) -> Self {
        ReportRecord {
            kind: kind.to_string(),
            fields: Vec::new(),
        }
    }

    pub fn field(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn parse(line: &str) -> Result<Self, RecordParseError> {
        let err = || RecordParseError(line.to_string());
        let mut chars = line.chars().peekable();
        let kind: String = chars.by_ref().take_while(|c| *c != ' ').collect();
        if kind.is_empty() {
            return Err(err());
        }
        let mut record = ReportRecord::new(&kind);
        while chars.peek().is_some() {
            let mut key = String::new();
            loop {
                match chars.next() {
                    Some('=') => break,
                    Some(' ') | None => return Err(err()),
                    Some(c) => key.push(c),
                }
            }
            if key.is_empty() {
                return Err(err());
            }
            let mut value = String::new();
            if chars.peek() == Some(&'"') {
                chars.next();
                loop {
                    match chars.next().ok_or_else(err)? {
                        '"' => break,
                        '\\' => value.push(chars.next().ok_or_else(err)?),
                        c => value.push(c),
                    }
                }
                match chars.next() {
                    None | Some(' ') => {}
                    Some(_) => return Err(err()),
                }
            } else {
                value = chars.by_ref().take_while(|c| *c != ' ').collect();
            }
            record.fields.push((key, value));
        }
        Ok(record)
    }
}

fn needs_quotes(value: &str) -> bool {
    value.is_empty() || value.chars().any(|c| c.is_whitespace() || matches!(c, '"' | '\\' | '='))
}

impl fmt::Display for ReportRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.kind)?;
        for (k, v) in &self.fields {
            if needs_quotes(v) {
                write!(f, " {k}=\"")?;
                for c in v.chars() {
                    if matches!(c, '"' | '\\') {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")?;
            } else {
                write!(f, " {k}={v}")?;
            }
        }
        Ok(())
    }
}

/// Joins records into newline-terminated text.
pub fn render(records: &[ReportRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_quoted() {
        let r = ReportRecord::new("rating")
            .field("value", 0.72)
            .field("path", "A>B>C")
            .field("note", "two words")
            .field("empty", "")
            .field("tricky", "a=\"b\\c\"");
        let line = r.to_string();
        assert_eq!(
            line,
            "rating value=0.72 path=A>B>C note=\"two words\" empty=\"\" tricky=\"a=\\\"b\\\\c\\\"\""
        );
        assert_eq!(ReportRecord::parse(&line).unwrap(), r);
        assert_eq!(r.get("value"), Some("0.72"));
    }

    #[test]
    fn bare_kind() {
        let r = ReportRecord::new("end");
        assert_eq!(ReportRecord::parse(&r.to_string()).unwrap(), r);
        assert!(ReportRecord::parse("").is_err());
        assert!(ReportRecord::parse("x novalue").is_err());
        assert!(ReportRecord::parse("x a=\"open").is_err());
    }
}
