//! Memento protocol artifacts: URI-Ms, Link headers, link-format TimeMaps and
//! the HTTP datetime headers that accompany them.

mod datetime;
mod link;
mod uri;

use std::collections::HashSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

pub use datetime::{format_http_datetime, format_timestamp14, parse_http_datetime, parse_timestamp14};
pub use link::{Link, LinkRelationSet, DO_NOT_NEGOTIATE};
pub use uri::{build_raw_uri, parse_memento_uri, MementoUri, Modifier, OriginalUri};

use crate::error::ProtocolError;

/// Parses a raw `Link` response header value.
pub fn parse_link_header(value: &str) -> Result<LinkRelationSet, ProtocolError> {
    let links = link::parse_links(value).map_err(|e| ProtocolError::MalformedLinkHeader(e.0))?;
    Ok(LinkRelationSet { links })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeMapEntry {
    pub memento: MementoUri,
    pub datetime: DateTime<Utc>,
    pub rels: Vec<String>,
}

/// A TimeMap as observed at one instant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeMapSnapshot {
    pub timemap_uri: String,
    pub original: OriginalUri,
    pub entries: Vec<TimeMapEntry>,
    /// Non-memento links: original, self, timegate and friends.
    pub relations: LinkRelationSet,
    pub observed_at: DateTime<Utc>,
    /// Memento links dropped because their datetime or URI-M did not parse.
    #[serde(default)]
    pub dropped_entries: usize,
}

impl TimeMapSnapshot {
    pub fn first(&self) -> Option<&TimeMapEntry> {
        self.entries.iter().find(|e| e.rels.iter().any(|r| r == "first"))
    }

    pub fn last(&self) -> Option<&TimeMapEntry> {
        self.entries.iter().find(|e| e.rels.iter().any(|r| r == "last"))
    }
}

/// Parses an `application/link-format` TimeMap body retrieved from `base`.
///
/// Memento links whose datetime is not an IMF-fixdate, or whose target is not
/// a URI-M, are dropped individually and counted in `dropped_entries`.
pub fn parse_link_format<S: AsRef<str>>(
    body: &str,
    base: &str,
    prefixes: &[S],
    observed_at: DateTime<Utc>,
) -> Result<TimeMapSnapshot, ProtocolError> {
    let links = link::parse_links(body).map_err(|e| ProtocolError::MalformedLinkFormat(e.0))?;
    let base_url = Url::parse(base).ok();

    let mut entries = Vec::new();
    let mut relations = Vec::new();
    let mut dropped = 0;
    for mut l in links {
        l.target = resolve(&l.target, base_url.as_ref());
        if !l.has_rel("memento") {
            relations.push(l);
            continue;
        }
        let memento = MementoUri::parse(&l.target, prefixes).or_else(|_| MementoUri::infer(&l.target));
        match (memento, l.datetime()) {
            (Ok(memento), Some(datetime)) => entries.push(TimeMapEntry {
                memento,
                datetime,
                rels: l.rels,
            }),
            _ => dropped += 1,
        }
    }
    let relations = LinkRelationSet { links: relations };

    let original = match relations.first_with_rel("original") {
        Some(l) => OriginalUri::parse(&l.target)?,
        None => original_from_timemap_uri(base).ok_or(ProtocolError::MissingOriginal)?,
    };

    Ok(TimeMapSnapshot {
        timemap_uri: base.to_string(),
        original,
        entries,
        relations,
        observed_at,
        dropped_entries: dropped,
    })
}

fn resolve(target: &str, base: Option<&Url>) -> String {
    if Url::parse(target).is_ok() {
        return target.to_string();
    }
    match base.and_then(|b| b.join(target).ok()) {
        Some(u) => u.to_string(),
        None => target.to_string(),
    }
}

/// A URI-T such as `.../timemap/link/http://a.com/` embeds its URI-R after
/// the archive's own path; take the last embedded absolute URI.
fn original_from_timemap_uri(uri_t: &str) -> Option<OriginalUri> {
    let skip = uri_t.find("://")? + 3;
    let tail = &uri_t[skip..];
    let idx = ["http://", "https://"]
        .iter()
        .filter_map(|s| tail.rfind(s))
        .max()?;
    OriginalUri::parse(&tail[idx..]).ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeMapChange {
    pub memento: MementoUri,
    pub datetime: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeMapDelta {
    pub added: Vec<TimeMapChange>,
    pub removed: Vec<TimeMapChange>,
    pub unchanged_count: usize,
}

impl TimeMapDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

/// Set difference of two snapshots of the same TimeMap; `earlier` first.
pub fn diff_timemaps(
    earlier: &TimeMapSnapshot,
    later: &TimeMapSnapshot,
) -> Result<TimeMapDelta, ProtocolError> {
    if earlier.original != later.original {
        return Err(ProtocolError::OriginalMismatch(
            earlier.original.to_string(),
            later.original.to_string(),
        ));
    }
    let key = |e: &TimeMapEntry| (e.memento.to_string(), e.datetime);
    let before: HashSet<_> = earlier.entries.iter().map(key).collect();
    let after: HashSet<_> = later.entries.iter().map(key).collect();

    let change = |e: &TimeMapEntry| TimeMapChange {
        memento: e.memento.clone(),
        datetime: e.datetime,
    };
    let mut seen = HashSet::new();
    let added = later
        .entries
        .iter()
        .filter(|e| !before.contains(&key(e)) && seen.insert(key(e)))
        .map(change)
        .collect();
    seen.clear();
    let removed = earlier
        .entries
        .iter()
        .filter(|e| !after.contains(&key(e)) && seen.insert(key(e)))
        .map(change)
        .collect();
    Ok(TimeMapDelta {
        added,
        removed,
        unchanged_count: before.intersection(&after).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    const PREFIXES: &[&str] = &["https://web.archive.org/web/"];
    const BBC_IMAGE: &str = "http://ichef.bbci.co.uk/wwhp/144/cpsprodpb/730D/production/_97235492_p05brd0w.jpg";

    fn observed() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2017, 8, 21, 0, 0, 0).unwrap()
    }

    fn timemap_uri() -> String {
        format!("https://web.archive.org/web/timemap/link/{BBC_IMAGE}")
    }

    #[test]
    fn donotnegotiate_header() {
        let set = parse_link_header(r#"<http://mementoweb.org/terms/donotnegotiate>; rel="type""#).unwrap();
        assert!(set.is_do_not_negotiate());
    }

    #[test]
    fn empty_link_header() {
        let set = parse_link_header("").unwrap();
        assert!(set.is_empty());
        assert!(!set.is_do_not_negotiate());
    }

    #[test]
    fn type_rel_to_other_target_is_not_donotnegotiate() {
        let set = parse_link_header(r#"<http://example.org/terms/x>; rel="type", <http://mementoweb.org/terms/donotnegotiate>; rel="describedby""#).unwrap();
        assert!(!set.is_do_not_negotiate());
    }

    #[test]
    fn multi_link_memento_header() {
        let value = concat!(
            r#"<http://www.cnn.com/>; rel="original", "#,
            r#"<http://web.archive.org/web/timemap/link/http://www.cnn.com/>; rel="timemap"; type="application/link-format", "#,
            r#"<http://web.archive.org/web/http://www.cnn.com/>; rel="timegate", "#,
            r#"<http://web.archive.org/web/20000620180259/http://cnn.com:80/>; rel="first memento"; datetime="Tue, 20 Jun 2000 18:02:59 GMT", "#,
            r#"<http://web.archive.org/web/20130723125209/http://www.cnn.com/>; rel="prev memento"; datetime="Tue, 23 Jul 2013 12:52:09 GMT", "#,
            r#"<http://web.archive.org/web/20130724144801/http://www.cnn.com/>; rel="memento"; datetime="Wed, 24 Jul 2013 14:48:01 GMT", "#,
            r#"<http://web.archive.org/web/20130725162936/http://www.cnn.com/>; rel="next memento"; datetime="Thu, 25 Jul 2013 16:29:36 GMT", "#,
            r#"<http://web.archive.org/web/20000620180259/http://cnn.com:80/>; rel="last memento"; datetime="Tue, 20 Jun 2000 18:02:59 GMT""#,
        );
        let set = parse_link_header(value).unwrap();
        assert_eq!(set.links.len(), 8);
        assert_eq!(set.first_with_rel("original").unwrap().target, "http://www.cnn.com/");
        let tm = set.first_with_rel("timemap").unwrap();
        assert_eq!(tm.param("type"), Some("application/link-format"));
        let first = set.first_with_rel("first").unwrap();
        assert_eq!(first.rels, vec!["first", "memento"]);
        assert_eq!(
            first.datetime(),
            Some(Utc.with_ymd_and_hms(2000, 6, 20, 18, 2, 59).unwrap())
        );
        assert_eq!(set.with_rel("memento").count(), 5);
        assert!(!set.is_do_not_negotiate());
    }

    #[test]
    fn malformed_link_header() {
        assert!(matches!(
            parse_link_header(r#"<http://a/>; rel="type"#),
            Err(ProtocolError::MalformedLinkHeader(_))
        ));
    }

    #[test]
    fn single_memento_timemap() {
        let body = format!(
            "<{BBC_IMAGE}>; rel=\"original\",\n<{}>; rel=\"self\"; type=\"application/link-format\",\n<https://web.archive.org/web/20170807230527/{BBC_IMAGE}>; rel=\"first last memento\"; datetime=\"Mon, 07 Aug 2017 23:05:27 GMT\"\n",
            timemap_uri()
        );
        let snap = parse_link_format(&body, &timemap_uri(), PREFIXES, observed()).unwrap();
        assert_eq!(snap.entries.len(), 1);
        assert_eq!(snap.entries[0].memento.timestamp(), "20170807230527");
        assert_eq!(
            snap.entries[0].datetime,
            Utc.with_ymd_and_hms(2017, 8, 7, 23, 5, 27).unwrap()
        );
        assert_eq!(snap.original.as_str(), BBC_IMAGE);
        assert_eq!(snap.first(), snap.last());
        assert!(snap.first().is_some());
        assert_eq!(snap.relations.links.len(), 2);
    }

    #[test]
    fn empty_timemap_body() {
        let snap = parse_link_format("", &timemap_uri(), PREFIXES, observed()).unwrap();
        assert!(snap.entries.is_empty());
        assert_eq!(snap.original.as_str(), BBC_IMAGE);
    }

    #[test]
    fn timemap_without_mementos() {
        let body = format!("<{BBC_IMAGE}>; rel=\"original\", <{}>; rel=\"self\"", timemap_uri());
        let snap = parse_link_format(&body, &timemap_uri(), PREFIXES, observed()).unwrap();
        assert!(snap.entries.is_empty());
        assert_eq!(snap.relations.links.len(), 2);
        assert!(snap.relations.first_with_rel("self").is_some());
    }

    #[test]
    fn bad_datetimes_drop_entries_not_documents() {
        let body = format!(
            "<{BBC_IMAGE}>; rel=\"original\",\n\
             </web/20170807230527/{BBC_IMAGE}>; rel=\"memento\"; datetime=\"Mon, 07 Aug 2017 23:05:27 GMT\",\n\
             </web/20170808000000/{BBC_IMAGE}>; rel=\"memento\"; datetime=\"2017-08-08T00:00:00Z\",\n\
             </web/20170809000000/{BBC_IMAGE}>; rel=\"memento\",\n\
             </web/notatimestamp/{BBC_IMAGE}>; rel=\"memento\"; datetime=\"Wed, 09 Aug 2017 00:00:00 GMT\""
        );
        let snap = parse_link_format(&body, &timemap_uri(), PREFIXES, observed()).unwrap();
        assert_eq!(snap.entries.len(), 1);
        assert_eq!(snap.dropped_entries, 3);
        // relative targets resolve against the URI-T
        assert_eq!(
            snap.entries[0].memento.to_string(),
            format!("https://web.archive.org/web/20170807230527/{BBC_IMAGE}")
        );
    }

    #[test]
    fn corrupt_timemap_is_an_error() {
        let body = format!("<{BBC_IMAGE}>; rel=\"original\",\n<https://web.archive.org/web/2017");
        assert!(matches!(
            parse_link_format(&body, &timemap_uri(), PREFIXES, observed()),
            Err(ProtocolError::MalformedLinkFormat(_))
        ));
    }

    fn snapshot(timestamps: &[&str]) -> TimeMapSnapshot {
        let entries = timestamps
            .iter()
            .map(|ts| {
                let memento = MementoUri::parse(
                    &format!("https://web.archive.org/web/{ts}/{BBC_IMAGE}"),
                    PREFIXES,
                )
                .unwrap();
                TimeMapEntry {
                    datetime: memento.datetime(),
                    memento,
                    rels: vec!["memento".into()],
                }
            })
            .collect();
        TimeMapSnapshot {
            timemap_uri: timemap_uri(),
            original: OriginalUri::parse(BBC_IMAGE).unwrap(),
            entries,
            relations: LinkRelationSet::default(),
            observed_at: observed(),
            dropped_entries: 0,
        }
    }

    #[test]
    fn empty_to_one_memento() {
        let delta = diff_timemaps(&snapshot(&[]), &snapshot(&["20170807230527"])).unwrap();
        assert_eq!(delta.added.len(), 1);
        assert_eq!(
            delta.added[0].datetime,
            Utc.with_ymd_and_hms(2017, 8, 7, 23, 5, 27).unwrap()
        );
        assert!(delta.removed.is_empty());
    }

    #[test]
    fn identical_snapshots_have_no_delta() {
        let s = snapshot(&["20170807230527", "20170901000000"]);
        let delta = diff_timemaps(&s, &s).unwrap();
        assert!(delta.is_empty());
        assert_eq!(delta.unchanged_count, 2);
    }

    #[test]
    fn shrinking_timemap() {
        let a = snapshot(&["20170101000000", "20170201000000", "20170301000000"]);
        let b = snapshot(&["20170101000000", "20170301000000"]);
        // oracle: hand set subtraction {1,2,3} \ {1,3} = {2}
        let delta = diff_timemaps(&a, &b).unwrap();
        assert!(delta.added.is_empty());
        assert_eq!(delta.removed.len(), 1);
        assert_eq!(delta.removed[0].memento.timestamp(), "20170201000000");
        assert_eq!(delta.unchanged_count, 2);
    }

    #[test]
    fn diff_requires_same_original() {
        let mut other = snapshot(&[]);
        other.original = OriginalUri::parse("http://www.cnn.com/").unwrap();
        assert!(matches!(
            diff_timemaps(&snapshot(&[]), &other),
            Err(ProtocolError::OriginalMismatch(..))
        ));
    }

    #[test]
    fn snapshot_json_round_trip() {
        let s = snapshot(&["20170807230527"]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<TimeMapSnapshot>(&text).unwrap(), s);
    }
}
