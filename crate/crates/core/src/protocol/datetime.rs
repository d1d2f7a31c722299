use chrono::{DateTime, NaiveDateTime, Utc};

use crate::error::ProtocolError;

const IMF_FIXDATE: &str = "%a, %d %b %Y %H:%M:%S GMT";
const TIMESTAMP14: &str = "%Y%m%d%H%M%S";

/// Parses an IMF-fixdate value such as `Mon, 09 Jan 2017 11:21:57 GMT`.
///
/// Only the canonical form is accepted: the value must re-format to exactly the
/// same text, so a wrong weekday or a single-digit day is rejected.
pub fn parse_http_datetime(value: &str) -> Result<DateTime<Utc>, ProtocolError> {
    let naive = NaiveDateTime::parse_from_str(value, IMF_FIXDATE)
        .map_err(|_| ProtocolError::MalformedDatetime(value.to_string()))?;
    let parsed = naive.and_utc();
    if format_http_datetime(&parsed) != value {
        return Err(ProtocolError::MalformedDatetime(value.to_string()));
    }
    Ok(parsed)
}

pub fn format_http_datetime(dt: &DateTime<Utc>) -> String {
    dt.format(IMF_FIXDATE).to_string()
}

/// Parses a 14-digit `YYYYMMDDhhmmss` archive timestamp as UTC.
pub fn parse_timestamp14(ts: &str) -> Option<DateTime<Utc>> {
    if ts.len() != 14 || !ts.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    NaiveDateTime::parse_from_str(ts, TIMESTAMP14)
        .ok()
        .map(|n| n.and_utc())
}

pub fn format_timestamp14(dt: &DateTime<Utc>) -> String {
    dt.format(TIMESTAMP14).to_string()
}
