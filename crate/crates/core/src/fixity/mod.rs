//! Canonical per-resource hashing, aggregation and manifests.

mod canonical;
mod compare;
mod profile;

use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

pub use canonical::{canonical_bytes, canonical_header_section, hash_resource};
pub use compare::{compare_manifests, ChangedRecord, InconclusiveRow, RecordSummary, Verdict, VerificationReport};
pub use profile::{HashAlgorithm, HashProfile, FORBIDDEN_HEADERS, STATUS};

use crate::config::ArchiveConfig;
use crate::error::FixityError;
use crate::extract::{expand_composite, Classification, ExpandOptions, Expansion, RowOutcome};
use crate::fetch::{FetchErrorKind, Fetcher, PageCache, Stability};
use crate::protocol::{MementoUri, OriginalUri};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRecord {
    pub target: OriginalUri,
    pub memento_uri: MementoUri,
    pub classification: Classification,
    #[serde(with = "rfc3339_opt")]
    pub memento_datetime: Option<DateTime<Utc>>,
    /// The response's Memento-Datetime disagrees with the URI-M timestamp.
    pub datetime_mismatch: bool,
    pub content_hash: String,
    pub header_digest_input: String,
    pub cache_status: PageCache,
    /// Query value appended to force a cache miss, if one was needed.
    pub cache_buster: Option<String>,
    pub stability: Stability,
    pub raw_used: bool,
    /// Hashed from replay content with archive markup removed.
    pub stripped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExclusionReason {
    ArchiveSpecific,
    LiveWeb,
    Dynamic,
    CacheHit,
    FetchError,
}

impl ExclusionReason {
    /// Reasons that describe the fetch rather than the resource; a change in
    /// these makes two manifests incomparable rather than different.
    pub fn is_unstable(self) -> bool {
        matches!(self, Self::Dynamic | Self::CacheHit | Self::FetchError)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedResource {
    pub uri: String,
    pub reason: ExclusionReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixityManifest {
    pub root: MementoUri,
    #[serde(with = "rfc3339")]
    pub observed_at: DateTime<Utc>,
    pub profile: HashProfile,
    pub records: Vec<ResourceRecord>,
    pub excluded: Vec<ExcludedResource>,
    pub aggregate_hash: String,
    pub toolkit_version: String,
}

impl FixityManifest {
    /// The exact text the aggregate digest is computed over when there is
    /// more than one record.
    pub fn aggregate_input(&self) -> String {
        aggregate_input(&self.records)
    }

    pub fn recompute_aggregate(&self) -> Result<String, FixityError> {
        aggregate(&self.records, &self.profile)
    }

    /// Checks the manifest invariants: records sorted, digests well formed,
    /// aggregate reproducible from the records.
    pub fn check(&self) -> Result<(), String> {
        if !self.records.windows(2).all(|w| sort_key(&w[0]) <= sort_key(&w[1])) {
            return Err("records are not sorted by (target, memento_uri)".into());
        }
        let len = self.profile.algorithm.hex_len();
        for r in &self.records {
            let ok = r.content_hash.len() == len
                && r.content_hash.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
            if !ok {
                return Err(format!("malformed content_hash for {}", r.memento_uri));
            }
        }
        match self.recompute_aggregate() {
            Ok(h) if h == self.aggregate_hash => Ok(()),
            Ok(h) => Err(format!("aggregate_hash {} does not match records ({h})", self.aggregate_hash)),
            Err(e) => Err(e.to_string()),
        }
    }

    pub fn to_json(&self) -> Result<String, FixityError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, FixityError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, FixityError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            FixityError::Serialization(serde_json::Error::io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            )))
        })?;
        Self::from_json(&text)
    }
}

fn sort_key(r: &ResourceRecord) -> (String, String) {
    (r.target.to_string(), r.memento_uri.to_string())
}

fn aggregate_input(records: &[ResourceRecord]) -> String {
    records
        .iter()
        .map(|r| format!("{} {}\n", r.content_hash, r.target))
        .collect()
}

/// Aggregate digest over records already in manifest order. A single record
/// aggregates to its own hash.
pub fn aggregate(records: &[ResourceRecord], profile: &HashProfile) -> Result<String, FixityError> {
    match records {
        [] => Err(FixityError::EmptyManifest("no records to aggregate".into())),
        [only] => Ok(only.content_hash.clone()),
        _ => Ok(profile.algorithm.digest(aggregate_input(records).as_bytes())),
    }
}

/// Turns an expansion into a manifest. Pure: every row ends up exactly once
/// in `records` or `excluded`, and the result does not depend on row order.
pub fn build_manifest(
    root: &MementoUri,
    expansion: &Expansion,
    profile: &HashProfile,
    cache_bypass: bool,
    observed_at: DateTime<Utc>,
) -> Result<FixityManifest, FixityError> {
    let mut records = Vec::new();
    let mut excluded = Vec::new();

    for row in &expansion.rows {
        let uri = row.resource.resolved_uri.clone();
        let exclude = |reason, detail: String| ExcludedResource {
            uri: uri.clone(),
            reason,
            detail,
        };
        let fetched = match &row.outcome {
            RowOutcome::NotFetched => {
                let reason = if row.classification.value == crate::extract::ClassificationValue::LiveWeb {
                    ExclusionReason::LiveWeb
                } else {
                    ExclusionReason::ArchiveSpecific
                };
                excluded.push(exclude(reason, format!("{:?}", row.classification.evidence)));
                continue;
            }
            RowOutcome::Failed(e) => {
                let reason = if e.kind == FetchErrorKind::TooManyCacheHits {
                    ExclusionReason::CacheHit
                } else {
                    ExclusionReason::FetchError
                };
                excluded.push(exclude(reason, format!("{:?}: {}", e.kind, e.detail)));
                continue;
            }
            RowOutcome::Fetched(r) => r,
        };
        if fetched.stability == Stability::Dynamic {
            excluded.push(exclude(ExclusionReason::Dynamic, "content differed between probe fetches".into()));
            continue;
        }
        if cache_bypass && fetched.page_cache == PageCache::Hit {
            excluded.push(exclude(ExclusionReason::CacheHit, "served from page cache".into()));
            continue;
        }
        let memento = match MementoUri::infer(&uri) {
            Ok(m) => m,
            Err(e) => {
                excluded.push(exclude(ExclusionReason::FetchError, e.to_string()));
                continue;
            }
        };
        let datetime_mismatch = fetched
            .memento_datetime
            .is_some_and(|dt| dt != memento.datetime());
        records.push(ResourceRecord {
            target: memento.target().clone(),
            classification: row.classification,
            memento_datetime: fetched.memento_datetime,
            datetime_mismatch,
            content_hash: hash_resource(fetched, profile),
            header_digest_input: canonical_header_section(fetched, profile),
            cache_status: fetched.page_cache,
            cache_buster: fetched.cache_buster.clone(),
            stability: fetched.stability,
            raw_used: fetched.raw_used,
            stripped: row.stripped,
            memento_uri: memento,
        });
    }

    records.sort_by_key(sort_key);
    excluded.sort_by(|a, b| (&a.uri, a.reason).cmp(&(&b.uri, b.reason)));
    let aggregate_hash = aggregate(&records, profile)
        .map_err(|_| FixityError::EmptyManifest(format!("nothing hashable under {root}")))?;
    Ok(FixityManifest {
        root: root.clone(),
        observed_at,
        profile: profile.clone(),
        records,
        excluded,
        aggregate_hash,
        toolkit_version: TOOLKIT_VERSION.to_string(),
    })
}

/// Expands, classifies, hashes and aggregates a composite memento.
pub fn hash_composite_memento(
    root: &MementoUri,
    fetcher: &Fetcher,
    profile: &HashProfile,
    config: &ArchiveConfig,
    options: &ExpandOptions,
) -> Result<FixityManifest, FixityError> {
    let observed_at = Utc::now();
    let expansion = expand_composite(root, fetcher, config, options);
    build_manifest(root, &expansion, profile, fetcher.policy().cache_bypass, observed_at)
}

/// Digest of the replayed HTML exactly as served: no stripping, no headers,
/// no embedded resources. Blind to anything outside the HTML bytes.
pub fn hash_html_only(root: &MementoUri, fetcher: &Fetcher, profile: &HashProfile) -> Result<String, FixityError> {
    let served = fetcher.fetch_resource(&root.to_string())?;
    Ok(profile.algorithm.digest(&served.body))
}

mod rfc3339 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(dt: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&dt.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&text)
            .map(|dt| dt.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

mod rfc3339_opt {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(dt: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match dt {
            Some(dt) => super::rfc3339::serialize(dt, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|text| {
                DateTime::parse_from_rfc3339(&text)
                    .map(|dt| dt.with_timezone(&Utc))
                    .map_err(serde::de::Error::custom)
            })
            .transpose()
    }
}
