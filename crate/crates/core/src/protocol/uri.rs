use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use url::Url;

use super::datetime::parse_timestamp14;
use crate::error::ProtocolError;

/// An original resource (URI-R): an absolute http or https URI, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OriginalUri(String);

impl OriginalUri {
    pub fn parse(uri: &str) -> Result<Self, ProtocolError> {
        match Url::parse(uri) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.has_host() => {
                Ok(Self(uri.to_string()))
            }
            _ => Err(ProtocolError::InvalidOriginal(uri.to_string())),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OriginalUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for OriginalUri {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for OriginalUri {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        OriginalUri::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// The archival modifier appended to a URI-M timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Modifier {
    None,
    /// `id_`: the archived bytes without replay rewriting.
    Raw,
    /// `im_`: image replay.
    Image,
    /// Any other `letters_` suffix, preserved verbatim.
    Opaque(String),
}

impl Modifier {
    fn from_suffix(suffix: &str) -> Self {
        match suffix {
            "" => Modifier::None,
            "id_" => Modifier::Raw,
            "im_" => Modifier::Image,
            other => Modifier::Opaque(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Modifier::None => "",
            Modifier::Raw => "id_",
            Modifier::Image => "im_",
            Modifier::Opaque(s) => s,
        }
    }
}

/// A parsed URI-M: `<archive_prefix><timestamp14><modifier>/<target>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MementoUri {
    archive_prefix: String,
    timestamp: String,
    datetime: DateTime<Utc>,
    modifier: Modifier,
    target: OriginalUri,
}

static AFTER_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([0-9]{14})([a-z]{1,8}_)?/(.+)$").unwrap());

static INFER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"/([0-9]{14})([a-z]{1,8}_)?/").unwrap());

impl MementoUri {
    pub fn new(
        archive_prefix: impl Into<String>,
        timestamp: &str,
        modifier: Modifier,
        target: OriginalUri,
    ) -> Result<Self, ProtocolError> {
        let datetime = parse_timestamp14(timestamp)
            .ok_or_else(|| ProtocolError::NotAMemento(format!("bad timestamp {timestamp:?}")))?;
        Ok(Self {
            archive_prefix: archive_prefix.into(),
            timestamp: timestamp.to_string(),
            datetime,
            modifier,
            target,
        })
    }

    /// Parses `uri` against a closed list of replay prefixes. The longest
    /// matching prefix wins.
    pub fn parse<S: AsRef<str>>(uri: &str, prefixes: &[S]) -> Result<Self, ProtocolError> {
        let prefix = prefixes
            .iter()
            .map(AsRef::as_ref)
            .filter(|p| !p.is_empty() && uri.starts_with(*p))
            .max_by_key(|p| p.len())
            .ok_or_else(|| ProtocolError::NotAMemento(uri.to_string()))?;
        Self::parse_after_prefix(uri, prefix)
    }

    /// Parses a URI-M without a prefix list by locating the first
    /// `/<14 digits><modifier?>/` path segment after the authority.
    pub fn infer(uri: &str) -> Result<Self, ProtocolError> {
        let not_memento = || ProtocolError::NotAMemento(uri.to_string());
        let after_scheme = uri.find("://").map(|i| i + 3).ok_or_else(not_memento)?;
        let path_start = uri[after_scheme..]
            .find('/')
            .map(|i| i + after_scheme)
            .ok_or_else(not_memento)?;
        let m = INFER.find_at(uri, path_start).ok_or_else(not_memento)?;
        Self::parse_after_prefix(uri, &uri[..=m.start()])
    }

    fn parse_after_prefix(uri: &str, prefix: &str) -> Result<Self, ProtocolError> {
        let rest = &uri[prefix.len()..];
        let caps = AFTER_PREFIX
            .captures(rest)
            .ok_or_else(|| ProtocolError::NotAMemento(uri.to_string()))?;
        let modifier = Modifier::from_suffix(caps.get(2).map_or("", |m| m.as_str()));
        let scheme = uri.split_once("://").map_or("http", |(s, _)| s);
        let target = normalize_target(&caps[3], scheme);
        let target =
            OriginalUri::parse(&target).map_err(|_| ProtocolError::NotAMemento(uri.to_string()))?;
        Self::new(prefix, &caps[1], modifier, target)
    }

    pub fn archive_prefix(&self) -> &str {
        &self.archive_prefix
    }

    pub fn timestamp(&self) -> &str {
        &self.timestamp
    }

    pub fn datetime(&self) -> DateTime<Utc> {
        self.datetime
    }

    pub fn modifier(&self) -> &Modifier {
        &self.modifier
    }

    pub fn target(&self) -> &OriginalUri {
        &self.target
    }

    pub fn with_modifier(&self, modifier: Modifier) -> Self {
        Self {
            modifier,
            ..self.clone()
        }
    }

    /// The same memento addressed with the `id_` raw-content modifier.
    /// Idempotent; replaces any other modifier.
    pub fn to_raw(&self) -> Self {
        self.with_modifier(Modifier::Raw)
    }

    /// Identity of the archived capture regardless of modifier.
    pub fn capture_key(&self) -> String {
        format!("{}{}/{}", self.archive_prefix, self.timestamp, self.target)
    }
}

/// Returns `m` addressed for raw (`id_`) retrieval.
pub fn build_raw_uri(m: &MementoUri) -> MementoUri {
    m.to_raw()
}

/// Parses a URI-M against the configured replay prefixes.
pub fn parse_memento_uri<S: AsRef<str>>(
    uri: &str,
    prefixes: &[S],
) -> Result<MementoUri, ProtocolError> {
    MementoUri::parse(uri, prefixes)
}

fn normalize_target(target: &str, memento_scheme: &str) -> String {
    let lower = target.get(..8).unwrap_or(target).to_ascii_lowercase();
    for scheme in ["https:", "http:"] {
        if lower.starts_with(scheme) {
            let rest = &target[scheme.len()..];
            if rest.starts_with("//") {
                return target.to_string();
            }
            // replay systems sometimes collapse the double slash
            return format!("{}//{}", &target[..scheme.len()], rest.trim_start_matches('/'));
        }
    }
    if let Some(rest) = target.strip_prefix("//") {
        return format!("{memento_scheme}://{rest}");
    }
    format!("http://{target}")
}

impl fmt::Display for MementoUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}/{}",
            self.archive_prefix,
            self.timestamp,
            self.modifier.as_str(),
            self.target
        )
    }
}

impl FromStr for MementoUri {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::infer(s)
    }
}

impl Serialize for MementoUri {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MementoUri {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        MementoUri::infer(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WAYBACK: &[&str] = &["https://web.archive.org/web/"];

    #[test]
    fn rewritten_logo_image() {
        let uri = "https://web.archive.org/web/20170705161539im_/http://www.weeklystandard.com/media/images/logo.png";
        let m = parse_memento_uri(uri, WAYBACK).unwrap();
        assert_eq!(m.archive_prefix(), "https://web.archive.org/web/");
        assert_eq!(m.timestamp(), "20170705161539");
        assert_eq!(m.modifier(), &Modifier::Image);
        assert_eq!(
            m.target().as_str(),
            "http://www.weeklystandard.com/media/images/logo.png"
        );
        assert_eq!(m.to_string(), uri);
    }

    #[test]
    fn live_uri_is_not_a_memento() {
        assert!(matches!(
            parse_memento_uri("http://www.cnn.com/", WAYBACK),
            Err(ProtocolError::NotAMemento(_))
        ));
    }

    #[test]
    fn raw_cnn_memento_keeps_port() {
        let uri = "https://web.archive.org/web/20100923005105id_/http://www.cnn.com:80/";
        let m = parse_memento_uri(uri, WAYBACK).unwrap();
        assert_eq!(m.timestamp(), "20100923005105");
        assert_eq!(m.modifier(), &Modifier::Raw);
        assert_eq!(m.target().as_str(), "http://www.cnn.com:80/");
        assert_eq!(m.to_string(), uri);
    }

    #[test]
    fn raw_uri_construction() {
        let replay = parse_memento_uri(
            "https://web.archive.org/web/20100923005105/http://www.cnn.com:80/",
            WAYBACK,
        )
        .unwrap();
        let raw = build_raw_uri(&replay);
        assert_eq!(
            raw.to_string(),
            "https://web.archive.org/web/20100923005105id_/http://www.cnn.com:80/"
        );
        assert_eq!(build_raw_uri(&raw), raw);

        let image = replay.with_modifier(Modifier::Image);
        assert_eq!(build_raw_uri(&image), raw);
        let opaque = replay.with_modifier(Modifier::Opaque("js_".into()));
        assert_eq!(build_raw_uri(&opaque), raw);
    }

    #[test]
    fn malformed_timestamps_are_rejected() {
        for uri in [
            "https://web.archive.org/web/2017070516153/http://a.com/",
            "https://web.archive.org/web/20171305161539/http://a.com/",
            "https://web.archive.org/web/201707051615399/http://a.com/",
            "https://web.archive.org/web/20170705161539",
            "https://web.archive.org/web/*/http://a.com/",
        ] {
            assert!(parse_memento_uri(uri, WAYBACK).is_err(), "{uri}");
        }
    }

    #[test]
    fn opaque_modifier_preserved() {
        let uri = "https://web.archive.org/web/20170705161539js_/http://a.com/x.js";
        let m = parse_memento_uri(uri, WAYBACK).unwrap();
        assert_eq!(m.modifier(), &Modifier::Opaque("js_".into()));
        assert_eq!(m.to_string(), uri);
    }

    #[test]
    fn schemeless_targets_are_normalized() {
        let cases = [
            ("https://web.archive.org/web/20170705161539/www.cnn.com/", "http://www.cnn.com/"),
            ("https://web.archive.org/web/20170705161539/https:/www.cnn.com/", "https://www.cnn.com/"),
            ("https://web.archive.org/web/20170705161539///www.cnn.com/", "https://www.cnn.com/"),
            ("https://web.archive.org/web/20170705161539/HTTP://www.cnn.com/", "HTTP://www.cnn.com/"),
        ];
        for (uri, target) in cases {
            let m = parse_memento_uri(uri, WAYBACK).unwrap();
            assert_eq!(m.target().as_str(), target, "{uri}");
        }
    }

    #[test]
    fn longest_prefix_wins() {
        let prefixes = ["http://a.org/", "http://a.org/web/"];
        let m = parse_memento_uri("http://a.org/web/20170705161539/http://b.com/", &prefixes).unwrap();
        assert_eq!(m.archive_prefix(), "http://a.org/web/");
    }

    #[test]
    fn inference_matches_configured_parse() {
        let uri = "http://127.0.0.1:8080/web/20170807230527im_/http://ichef.bbci.co.uk/wwhp/144/cpsprodpb/730D/production/_97235492_p05brd0w.jpg";
        let inferred = MementoUri::infer(uri).unwrap();
        let configured = parse_memento_uri(uri, &["http://127.0.0.1:8080/web/"]).unwrap();
        assert_eq!(inferred, configured);
        assert!(MementoUri::infer("http://127.0.0.1:8080/web/timemap/link/http://a.com/").is_err());
    }

    #[test]
    fn original_uri_requires_http() {
        assert!(OriginalUri::parse("ftp://a.com/").is_err());
        assert!(OriginalUri::parse("/relative").is_err());
        assert!(OriginalUri::parse("https://a.com/x").is_ok());
    }
}
