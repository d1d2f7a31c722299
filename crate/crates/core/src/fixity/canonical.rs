use crate::fetch::FetchResult;

use super::profile::{HashProfile, STATUS};

/// The header section of the canonical serialization: one `name:value` line
/// per profile entry, then a blank line. Empty when the profile lists no
/// headers.
///
/// Values are trimmed with internal whitespace runs collapsed to one space;
/// absent headers serialize as `-`. `location` is the first redirect's
/// `Location`, since the final response of a followed chain has none.
pub fn canonical_header_section(result: &FetchResult, profile: &HashProfile) -> String {
    let mut out = String::new();
    for name in &profile.included_headers {
        let value = if name == STATUS {
            Some(result.status.to_string())
        } else if name == "location" {
            result.location.clone().or_else(|| result.header(name))
        } else {
            result.header(name)
        };
        let value = value.map(|v| collapse_whitespace(&v));
        out.push_str(name);
        out.push(':');
        out.push_str(value.as_deref().unwrap_or("-"));
        out.push('\n');
    }
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Full canonical bytes: header section followed by the body verbatim.
pub fn canonical_bytes(result: &FetchResult, profile: &HashProfile) -> Vec<u8> {
    let mut bytes = canonical_header_section(result, profile).into_bytes();
    if profile.include_body {
        bytes.extend_from_slice(&result.body);
    }
    bytes
}

/// Lowercase hex digest of the canonical serialization.
pub fn hash_resource(result: &FetchResult, profile: &HashProfile) -> String {
    profile.algorithm.digest(&canonical_bytes(result, profile))
}

fn collapse_whitespace(value: &str) -> String {
    value.split_whitespace().collect::<Vec<_>>().join(" ")
}
