use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::datetime::parse_http_datetime;

pub const DO_NOT_NEGOTIATE: &str = "http://mementoweb.org/terms/donotnegotiate";

/// One web link: a target, its relation types, and the remaining parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub target: String,
    pub rels: Vec<String>,
    pub params: Vec<(String, String)>,
}

impl Link {
    pub fn has_rel(&self, rel: &str) -> bool {
        self.rels.iter().any(|r| r.eq_ignore_ascii_case(rel))
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// The `datetime` parameter, if present and well-formed.
    pub fn datetime(&self) -> Option<DateTime<Utc>> {
        self.param("datetime").and_then(|v| parse_http_datetime(v).ok())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRelationSet {
    pub links: Vec<Link>,
}

impl LinkRelationSet {
    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn with_rel<'a>(&'a self, rel: &'a str) -> impl Iterator<Item = &'a Link> + 'a {
        self.links.iter().filter(move |l| l.has_rel(rel))
    }

    pub fn first_with_rel(&self, rel: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.has_rel(rel))
    }

    /// True when the resource declares itself exempt from datetime negotiation.
    pub fn is_do_not_negotiate(&self) -> bool {
        self.with_rel("type")
            .any(|l| l.target.trim_end_matches('/') == DO_NOT_NEGOTIATE)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SyntaxError(pub String);

/// Splits a comma-separated list of `<target>; param=value` links.
///
/// Commas inside angle brackets or quoted strings do not separate links.
/// Empty list elements (doubled commas, trailing newlines) are ignored.
pub(crate) fn parse_links(input: &str) -> Result<Vec<Link>, SyntaxError> {
    let mut links = Vec::new();
    let mut cursor = Cursor::new(input);
    loop {
        cursor.skip_ws_and(|c| c == ',');
        if cursor.at_end() {
            break;
        }
        if !cursor.eat('<') {
            return Err(cursor.error("expected '<'"));
        }
        let target = cursor
            .take_until('>')
            .ok_or_else(|| cursor.error("unterminated '<'"))?
            .trim()
            .to_string();
        let mut rels = Vec::new();
        let mut params = Vec::new();
        loop {
            cursor.skip_ws();
            if cursor.at_end() || cursor.eat(',') {
                break;
            }
            if !cursor.eat(';') {
                return Err(cursor.error("expected ';' or ','"));
            }
            cursor.skip_ws();
            let name = cursor.take_token().to_ascii_lowercase();
            if name.is_empty() {
                // tolerate a stray trailing ';'
                continue;
            }
            cursor.skip_ws();
            let value = if cursor.eat('=') {
                cursor.skip_ws();
                if cursor.eat('"') {
                    cursor.take_quoted().ok_or_else(|| cursor.error("unterminated quote"))?
                } else {
                    cursor.take_token()
                }
            } else {
                String::new()
            };
            if name == "rel" {
                if rels.is_empty() {
                    rels = value.split_whitespace().map(str::to_ascii_lowercase).collect();
                }
            } else {
                params.push((name, value));
            }
        }
        links.push(Link {
            target,
            rels,
            params,
        });
    }
    Ok(links)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn error(&self, what: &str) -> SyntaxError {
        SyntaxError(format!("{what} at byte {}", self.pos))
    }

    fn eat(&mut self, c: char) -> bool {
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        self.skip_ws_and(|_| false);
    }

    fn skip_ws_and(&mut self, extra: impl Fn(char) -> bool) {
        let rest = self.rest();
        let trimmed = rest.trim_start_matches(|c: char| c.is_whitespace() || extra(c));
        self.pos += rest.len() - trimmed.len();
    }

    fn take_until(&mut self, end: char) -> Option<&'a str> {
        let rest = self.rest();
        let idx = rest.find(end)?;
        self.pos += idx + end.len_utf8();
        Some(&rest[..idx])
    }

    fn take_token(&mut self) -> String {
        let rest = self.rest();
        let len = rest
            .find(|c: char| c.is_whitespace() || matches!(c, ';' | ',' | '=' | '"'))
            .unwrap_or(rest.len());
        self.pos += len;
        rest[..len].to_string()
    }

    fn take_quoted(&mut self) -> Option<String> {
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Some(out);
                }
                '\\' => {
                    let (_, escaped) = chars.next()?;
                    out.push(escaped);
                }
                c => out.push(c),
            }
        }
        None
    }
}
