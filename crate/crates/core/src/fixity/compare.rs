use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ExclusionReason, FixityManifest, ResourceRecord};
use crate::error::FixityError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Match,
    Tampered,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub target: String,
    pub memento_uri: String,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangedRecord {
    pub target: String,
    pub memento_uri: String,
    pub before: String,
    pub after: String,
}

/// A resource whose exclusion status differs in a way that prevents a
/// like-for-like comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InconclusiveRow {
    pub uri: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub aggregate_before: String,
    pub aggregate_after: String,
    pub changed: Vec<ChangedRecord>,
    pub added: Vec<RecordSummary>,
    pub removed: Vec<RecordSummary>,
    pub inconclusive: Vec<InconclusiveRow>,
}

fn summary(r: &ResourceRecord) -> RecordSummary {
    RecordSummary {
        target: r.target.to_string(),
        memento_uri: r.memento_uri.to_string(),
        content_hash: r.content_hash.clone(),
    }
}

/// Status of a resource URI in one manifest: recorded, or excluded for a
/// reason.
fn status(m: &FixityManifest) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for r in &m.records {
        out.insert(r.memento_uri.to_string(), "recorded".to_string());
    }
    for e in &m.excluded {
        out.insert(e.uri.clone(), format!("excluded:{:?}", e.reason));
    }
    out
}

/// Compares an earlier manifest `a` with a later one `b`.
///
/// Any changed record hash means Tampered. Otherwise, if the set of
/// resources excluded for fetch-dependent reasons (Dynamic, CacheHit,
/// FetchError) differs, the record sets are not comparable and the verdict
/// is Inconclusive. Otherwise added or removed records mean Tampered.
pub fn compare_manifests(a: &FixityManifest, b: &FixityManifest) -> Result<VerificationReport, FixityError> {
    if a.root.capture_key() != b.root.capture_key() {
        return Err(FixityError::RootMismatch(a.root.to_string(), b.root.to_string()));
    }
    if a.profile != b.profile {
        return Err(FixityError::ProfileMismatch);
    }

    let key = |r: &ResourceRecord| (r.target.to_string(), r.memento_uri.to_string());
    let before: BTreeMap<_, _> = a.records.iter().map(|r| (key(r), r)).collect();
    let after: BTreeMap<_, _> = b.records.iter().map(|r| (key(r), r)).collect();

    let mut changed = Vec::new();
    let mut removed = Vec::new();
    for (k, ra) in &before {
        match after.get(k) {
            Some(rb) if rb.content_hash != ra.content_hash => changed.push(ChangedRecord {
                target: k.0.clone(),
                memento_uri: k.1.clone(),
                before: ra.content_hash.clone(),
                after: rb.content_hash.clone(),
            }),
            Some(_) => {}
            None => removed.push(summary(ra)),
        }
    }
    let added: Vec<_> = after
        .iter()
        .filter(|(k, _)| !before.contains_key(*k))
        .map(|(_, r)| summary(r))
        .collect();

    let unstable = |m: &FixityManifest| -> BTreeSet<String> {
        m.excluded
            .iter()
            .filter(|e| e.reason.is_unstable())
            .map(|e| e.uri.clone())
            .collect()
    };
    let (ua, ub) = (unstable(a), unstable(b));
    let (sa, sb) = (status(a), status(b));
    let absent = || "absent".to_string();
    let inconclusive: Vec<_> = ua
        .symmetric_difference(&ub)
        .map(|uri| InconclusiveRow {
            uri: uri.clone(),
            before: sa.get(uri).cloned().unwrap_or_else(absent),
            after: sb.get(uri).cloned().unwrap_or_else(absent),
        })
        .collect();

    let verdict = if !changed.is_empty() {
        Verdict::Tampered
    } else if !inconclusive.is_empty() {
        Verdict::Inconclusive
    } else if !added.is_empty() || !removed.is_empty() {
        Verdict::Tampered
    } else {
        Verdict::Match
    };
    Ok(VerificationReport {
        verdict,
        aggregate_before: a.aggregate_hash.clone(),
        aggregate_after: b.aggregate_hash.clone(),
        changed,
        added,
        removed,
        inconclusive,
    })
}

impl ExclusionReason {
    pub fn label(self) -> &'static str {
        match self {
            Self::ArchiveSpecific => "ArchiveSpecific",
            Self::LiveWeb => "LiveWeb",
            Self::Dynamic => "Dynamic",
            Self::CacheHit => "CacheHit",
            Self::FetchError => "FetchError",
        }
    }
}
