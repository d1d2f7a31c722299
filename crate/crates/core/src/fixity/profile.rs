use std::path::Path;

use md5::Md5;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;

/// Pseudo-header naming the response status line in `included_headers`.
pub const STATUS: &str = "status";

/// Headers that vary per request or per hop and so can never be part of a
/// repeatable digest. `x-page-cache` is cache evidence, not content.
pub const FORBIDDEN_HEADERS: &[&str] = &[
    "date",
    "age",
    "expires",
    "connection",
    "keep-alive",
    "proxy-authenticate",
    "proxy-authorization",
    "te",
    "trailer",
    "transfer-encoding",
    "upgrade",
    "x-page-cache",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashAlgorithm {
    Sha256,
    /// Compatibility only.
    Md5,
}

impl HashAlgorithm {
    pub fn digest(self, bytes: &[u8]) -> String {
        match self {
            Self::Sha256 => hex::encode(Sha256::digest(bytes)),
            Self::Md5 => hex::encode(Md5::digest(bytes)),
        }
    }

    pub fn hex_len(self) -> usize {
        match self {
            Self::Sha256 => 64,
            Self::Md5 => 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashProfile {
    pub algorithm: HashAlgorithm,
    /// Lowercase header names in serialization order; `status` stands for the
    /// response status code.
    pub included_headers: Vec<String>,
    pub include_body: bool,
    pub html_only: bool,
}

impl Default for HashProfile {
    fn default() -> Self {
        Self {
            algorithm: HashAlgorithm::Sha256,
            included_headers: vec![STATUS.into(), "content-type".into(), "location".into()],
            include_body: true,
            html_only: false,
        }
    }
}

impl HashProfile {
    /// Hashes only the body bytes: no status line, no headers.
    pub fn body_only() -> Self {
        Self {
            included_headers: vec![],
            ..Self::default()
        }
    }

    /// Lowercases header names and rejects date-varying, hop-by-hop,
    /// duplicate or syntactically invalid ones.
    pub fn validated(mut self) -> Result<Self, ConfigError> {
        let mut seen = std::collections::HashSet::new();
        for name in &mut self.included_headers {
            *name = name.trim().to_ascii_lowercase();
            if name.is_empty() || name.contains(|c: char| c == ':' || c.is_whitespace() || c.is_control()) {
                return Err(ConfigError::Profile(format!("invalid header name {name:?}")));
            }
            if FORBIDDEN_HEADERS.contains(&name.as_str()) {
                return Err(ConfigError::Profile(format!(
                    "header {name:?} varies between requests and cannot be hashed"
                )));
            }
            if !seen.insert(name.clone()) {
                return Err(ConfigError::Profile(format!("header {name:?} listed twice")));
            }
        }
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let profile: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Json {
            path: path.display().to_string(),
            source,
        })?;
        profile.validated()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn date_varying_headers_rejected() {
        for bad in ["Date", "age", "EXPIRES", "Transfer-Encoding", "X-Page-Cache"] {
            let p = HashProfile {
                included_headers: vec![bad.into()],
                ..HashProfile::default()
            };
            assert!(p.validated().is_err(), "{bad}");
        }
    }

    #[test]
    fn names_are_normalized() {
        let p = HashProfile {
            included_headers: vec![" Content-Type ".into(), "STATUS".into()],
            ..HashProfile::default()
        }
        .validated()
        .unwrap();
        assert_eq!(p.included_headers, vec!["content-type", "status"]);
    }

    #[test]
    fn duplicates_and_junk_rejected() {
        for headers in [vec!["content-type", "Content-Type"], vec!["a b"], vec![""], vec!["x:y"]] {
            let p = HashProfile {
                included_headers: headers.iter().map(|s| s.to_string()).collect(),
                ..HashProfile::default()
            };
            assert!(p.validated().is_err(), "{headers:?}");
        }
    }

    #[test]
    fn json_shape() {
        let text = serde_json::to_string(&HashProfile::default()).unwrap();
        assert_eq!(
            text,
            r#"{"algorithm":"sha256","included_headers":["status","content-type","location"],"include_body":true,"html_only":false}"#
        );
    }

    #[test]
    fn digest_lengths() {
        assert_eq!(HashAlgorithm::Sha256.digest(b"x").len(), HashAlgorithm::Sha256.hex_len());
        assert_eq!(HashAlgorithm::Md5.digest(b"x").len(), HashAlgorithm::Md5.hex_len());
        assert_eq!(HashAlgorithm::Md5.digest(b""), "d41d8cd98f00b204e9800998ecf8427e");
    }
}
