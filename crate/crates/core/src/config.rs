//! Archive configuration: replay prefixes, the archive-specific deny-list and
//! the banner selectors used when stripping replay markup.
//!
//! The file is plain text with `[prefixes]`, `[deny]` and `[banner-selectors]`
//! sections and one value per line. A `#` followed by whitespace (or ending
//! the line) starts a comment, so `#wm-ipp` is a selector. Lines before any section
//! header are replay prefixes. A `[deny]` or `[banner-selectors]` section
//! replaces the built-in defaults for that list.

use std::path::Path;

use url::Url;

use crate::error::ConfigError;

pub const DEFAULT_PREFIXES: &[&str] = &[
    "https://web.archive.org/web/",
    "http://web.archive.org/web/",
    "https://www.webarchive.org.uk/wayback/archive/",
    "https://wayback.archive-it.org/all/",
    "https://archive.today/",
];

pub const DEFAULT_DENY: &[&str] = &[
    "/_static/",
    "/static/",
    "/wayback/archive/images/toolbar/",
];

pub const DEFAULT_BANNER_SELECTORS: &[&str] = &["#wm-ipp", "#wm-ipp-base", "#wm-ipp-print", "#donato"];

/// A deny-list entry. Patterns containing `://` match a URI prefix; patterns
/// starting with `/` match a path prefix on any host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DenyPattern {
    UriPrefix(String),
    PathPrefix(String),
}

impl DenyPattern {
    pub fn parse(text: &str) -> Option<Self> {
        if text.contains("://") {
            Some(Self::UriPrefix(text.to_string()))
        } else if text.starts_with('/') {
            Some(Self::PathPrefix(text.to_string()))
        } else {
            None
        }
    }

    /// Matches an absolute URI, or a path-absolute reference.
    pub fn matches(&self, uri: &str) -> bool {
        match self {
            Self::UriPrefix(p) => uri.starts_with(p.as_str()),
            Self::PathPrefix(p) => {
                if uri.starts_with('/') && !uri.starts_with("//") {
                    return uri.starts_with(p.as_str());
                }
                Url::parse(uri).is_ok_and(|u| u.path().starts_with(p.as_str()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveConfig {
    pub prefixes: Vec<String>,
    pub deny: Vec<DenyPattern>,
    pub banner_selectors: Vec<String>,
}

impl Default for ArchiveConfig {
    fn default() -> Self {
        Self {
            prefixes: DEFAULT_PREFIXES.iter().map(|s| s.to_string()).collect(),
            deny: DEFAULT_DENY.iter().filter_map(|s| DenyPattern::parse(s)).collect(),
            banner_selectors: DEFAULT_BANNER_SELECTORS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ArchiveConfig {
    pub fn with_prefixes<I, S>(prefixes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            prefixes: prefixes.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let err = |line: usize, message: String| ConfigError::Syntax {
            path: origin.to_string(),
            line,
            message,
        };
        let mut prefixes = Vec::new();
        let mut deny = None::<Vec<DenyPattern>>;
        let mut selectors = None::<Vec<String>>;
        let mut section = "prefixes".to_string();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                match section.as_str() {
                    "prefixes" => {}
                    "deny" => {
                        deny.get_or_insert_with(Vec::new);
                    }
                    "banner-selectors" => {
                        selectors.get_or_insert_with(Vec::new);
                    }
                    other => return Err(err(line_no, format!("unknown section [{other}]"))),
                }
                continue;
            }
            match section.as_str() {
                "prefixes" => {
                    let ok = Url::parse(line)
                        .is_ok_and(|u| matches!(u.scheme(), "http" | "https") && u.has_host());
                    if !ok || !line.ends_with('/') {
                        return Err(err(
                            line_no,
                            format!("replay prefix must be an absolute http(s) URI ending in '/': {line}"),
                        ));
                    }
                    prefixes.push(line.to_string());
                }
                "deny" => {
                    let pattern = DenyPattern::parse(line).ok_or_else(|| {
                        err(line_no, format!("deny pattern must be a URI or start with '/': {line}"))
                    })?;
                    deny.get_or_insert_with(Vec::new).push(pattern);
                }
                _ => selectors.get_or_insert_with(Vec::new).push(line.to_string()),
            }
        }

        let defaults = Self::default();
        Ok(Self {
            prefixes,
            deny: deny.unwrap_or(defaults.deny),
            banner_selectors: selectors.unwrap_or(defaults.banner_selectors),
        })
    }

    pub fn is_denied(&self, uri: &str) -> bool {
        self.deny.iter().any(|p| p.matches(uri))
    }

    /// True when `uri` is served from the same origin as a configured replay prefix.
    pub fn is_archive_hosted(&self, uri: &str) -> bool {
        let Ok(target) = Url::parse(uri) else {
            return false;
        };
        self.prefixes.iter().filter_map(|p| Url::parse(p).ok()).any(|p| {
            p.scheme() == target.scheme()
                && p.host_str() == target.host_str()
                && p.port_or_known_default() == target.port_or_known_default()
        })
    }
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        let starts_comment = *b == b'#'
            && (i == 0 || bytes[i - 1].is_ascii_whitespace())
            && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace());
        if starts_comment {
            return &line[..i];
        }
    }
    line
}
