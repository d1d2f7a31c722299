//! Composite memento discovery and classification.
//!
//! A composite memento is the root page plus everything it embeds. Embedded
//! references are discovered in the replayed markup, which is what a client
//! actually loads, and each one is classified as an archived memento, an
//! archive-specific resource (banners, toolbars) or a live-web leak. Only
//! archived mementos are fetched for hashing, and they are fetched raw.

mod discover;
mod strip;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use discover::{discover_resources, resolve_reference, Discovery, DocumentKind};
pub use strip::{strip_archive_markup, StripProfile, ARCHIVE_COMMENT_MARKER};

use crate::config::ArchiveConfig;
use crate::fetch::{FetchError, FetchErrorKind, FetchResult, Fetcher, Stability};
use crate::protocol::{LinkRelationSet, MementoUri, Modifier};

pub const DEFAULT_MAX_DEPTH: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResourceOrigin {
    /// The memento the expansion started from.
    Root,
    ImgSrc,
    ImgSrcset,
    ScriptSrc,
    StylesheetHref,
    CssUrl,
    IframeSrc,
    FrameSrc,
    ObjectData,
    EmbedSrc,
    LinkIconHref,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveredResource {
    pub raw_reference: String,
    pub resolved_uri: String,
    pub origin: ResourceOrigin,
    pub source_uri: String,
    pub depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassificationValue {
    ArchivedMemento,
    ArchiveSpecific,
    LiveWeb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Evidence {
    UriPattern,
    DoNotNegotiateHeader,
    ConfigDenyList,
    NoArchivePrefix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Classification {
    pub value: ClassificationValue,
    pub evidence: Evidence,
}

impl Classification {
    pub const fn new(value: ClassificationValue, evidence: Evidence) -> Self {
        Self { value, evidence }
    }

    pub fn is_archived(&self) -> bool {
        self.value == ClassificationValue::ArchivedMemento
    }
}

/// Classifies a discovered URI. `probe` is the resource's response `Link`
/// header, when it was inspected.
pub fn classify_uri(uri: &str, probe: Option<&LinkRelationSet>, config: &ArchiveConfig) -> Classification {
    use ClassificationValue::*;
    if probe.is_some_and(LinkRelationSet::is_do_not_negotiate) {
        return Classification::new(ArchiveSpecific, Evidence::DoNotNegotiateHeader);
    }
    if config.is_denied(uri) {
        return Classification::new(ArchiveSpecific, Evidence::ConfigDenyList);
    }
    if MementoUri::parse(uri, &config.prefixes).is_ok() {
        return Classification::new(ArchivedMemento, Evidence::UriPattern);
    }
    Classification::new(LiveWeb, Evidence::NoArchivePrefix)
}

/// Whether classification needs a header probe. Live-web URIs are never
/// contacted; `im_` mementos are taken on URI-pattern evidence alone.
pub fn needs_probe(uri: &str, config: &ArchiveConfig) -> bool {
    if config.is_denied(uri) || !config.is_archive_hosted(uri) {
        return false;
    }
    match MementoUri::parse(uri, &config.prefixes) {
        Ok(m) => *m.modifier() != Modifier::Image,
        Err(_) => true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowOutcome {
    Fetched(FetchResult),
    Failed(FetchError),
    /// Archive-specific and live-web rows are recorded but never fetched.
    NotFetched,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionRow {
    pub resource: DiscoveredResource,
    pub classification: Classification,
    pub outcome: RowOutcome,
    /// The body came from replay content with archive markup stripped,
    /// because raw retrieval failed.
    pub stripped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expansion {
    pub rows: Vec<ExpansionRow>,
    /// References dropped during discovery, and documents whose replay form
    /// could not be retrieved for discovery.
    pub warnings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpandOptions {
    pub max_depth: u32,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Breadth-first expansion of a composite memento.
///
/// Each level is fetched in parallel; rows come back in discovery order, so
/// the result does not depend on completion order. Per-resource fetch errors
/// are recorded in the row.
pub fn expand_composite(
    root: &MementoUri,
    fetcher: &Fetcher,
    config: &ArchiveConfig,
    options: &ExpandOptions,
) -> Expansion {
    let strip_profile = StripProfile::from_config(config);
    let root_resource = DiscoveredResource {
        raw_reference: root.to_string(),
        resolved_uri: root.to_string(),
        origin: ResourceOrigin::Root,
        source_uri: root.to_string(),
        depth: 0,
    };
    let mut seen: HashSet<String> = HashSet::from([root.capture_key()]);
    let mut level = vec![(
        root_resource,
        Classification::new(ClassificationValue::ArchivedMemento, Evidence::UriPattern),
    )];
    let mut expansion = Expansion::default();

    while !level.is_empty() {
        let processed: Vec<(ExpansionRow, Discovery)> = level
            .into_par_iter()
            .map(|(resource, classification)| {
                process(resource, classification, fetcher, config, options, &strip_profile)
            })
            .collect();

        let mut candidates = Vec::new();
        for (row, discovery) in processed {
            expansion.warnings += discovery.skipped;
            expansion.rows.push(row);
            for found in discovery.resources {
                let key = match MementoUri::parse(&found.resolved_uri, &config.prefixes) {
                    Ok(m) => m.capture_key(),
                    Err(_) => found.resolved_uri.clone(),
                };
                if seen.insert(key) {
                    candidates.push(found);
                }
            }
        }
        level = candidates
            .into_par_iter()
            .map(|found| {
                let probe = needs_probe(&found.resolved_uri, config)
                    .then(|| fetcher.probe_links(&found.resolved_uri).ok())
                    .flatten();
                let classification = classify_uri(&found.resolved_uri, probe.as_ref(), config);
                (found, classification)
            })
            .collect();
    }
    if fetcher.policy().stability_probe {
        probe_rows(&mut expansion.rows, fetcher, &strip_profile);
    }
    expansion
}

/// Stability pass over every fetched row: one policy delay for the whole
/// expansion, then each resource is fetched again in parallel. A row whose
/// second body or status differs is marked `Dynamic`; a failed second fetch
/// fails the row.
fn probe_rows(rows: &mut [ExpansionRow], fetcher: &Fetcher, strip_profile: &StripProfile) {
    let delay = fetcher.policy().stability_delay_ms;
    if delay > 0 {
        std::thread::sleep(std::time::Duration::from_millis(delay));
    }
    rows.par_iter_mut().for_each(|row| {
        let RowOutcome::Fetched(first) = &mut row.outcome else {
            return;
        };
        match fetcher.fetch_resource(&first.requested_uri) {
            Ok(second) => {
                let body = if row.stripped {
                    strip_archive_markup(&second.body, strip_profile)
                } else {
                    second.body
                };
                first.stability = if body == first.body && second.status == first.status {
                    Stability::Stable
                } else {
                    Stability::Dynamic
                };
            }
            Err(e) => row.outcome = RowOutcome::Failed(e),
        }
    });
}

fn process(
    resource: DiscoveredResource,
    classification: Classification,
    fetcher: &Fetcher,
    config: &ArchiveConfig,
    options: &ExpandOptions,
    strip_profile: &StripProfile,
) -> (ExpansionRow, Discovery) {
    let not_fetched = |resource, classification| {
        (
            ExpansionRow {
                resource,
                classification,
                outcome: RowOutcome::NotFetched,
                stripped: false,
            },
            Discovery::default(),
        )
    };
    if !classification.is_archived() {
        return not_fetched(resource, classification);
    }
    let memento = match MementoUri::parse(&resource.resolved_uri, &config.prefixes) {
        Ok(m) => m,
        Err(_) => return not_fetched(resource, classification),
    };
    let replay_uri = memento.to_string();

    let mut replay: Option<FetchResult> = None;
    let mut stripped = false;
    let hashed = match fetcher.fetch_raw(&memento) {
        Ok(raw) => Ok(raw),
        Err(e) if matches!(e.kind, FetchErrorKind::HttpStatus(_)) => {
            match fetcher.fetch_resource(&replay_uri) {
                Ok(served) => {
                    let mut hashed = served.clone();
                    if kind_of(&served) == DocumentKind::Html {
                        hashed.body = strip_archive_markup(&served.body, strip_profile);
                        stripped = true;
                    }
                    replay = Some(served);
                    Ok(hashed)
                }
                Err(e) => Err(e),
            }
        }
        Err(e) => Err(e),
    };

    let mut discovery = Discovery::default();
    if let Ok(fetched) = &hashed {
        let kind = kind_of(fetched);
        if kind != DocumentKind::Other && resource.depth < options.max_depth {
            if replay.is_none() {
                replay = fetcher.fetch_resource(&replay_uri).ok();
            }
            match &replay {
                Some(served) => {
                    discovery = discover_resources(
                        &served.body,
                        served.content_type.as_deref().unwrap_or(""),
                        &served.final_uri,
                        resource.depth,
                    );
                }
                None => discovery.skipped += 1,
            }
        }
    }

    let outcome = match hashed {
        Ok(r) => RowOutcome::Fetched(r),
        Err(e) => RowOutcome::Failed(e),
    };
    (
        ExpansionRow {
            resource,
            classification,
            outcome,
            stripped,
        },
        discovery,
    )
}

fn kind_of(r: &FetchResult) -> DocumentKind {
    DocumentKind::from_content_type(r.content_type.as_deref().unwrap_or(""))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::parse_link_header;

    fn cfg() -> ArchiveConfig {
        ArchiveConfig::with_prefixes(["https://web.archive.org/web/", "https://www.webarchive.org.uk/wayback/archive/"])
    }

    #[test]
    fn donotnegotiate_toolbar_image() {
        let uri = "https://www.webarchive.org.uk/wayback/archive/images/toolbar/wayback-toolbar-logo.png";
        let probe = parse_link_header(r#"<http://mementoweb.org/terms/donotnegotiate>; rel="type""#).unwrap();
        let c = classify_uri(uri, Some(&probe), &cfg());
        assert_eq!(c, Classification::new(ClassificationValue::ArchiveSpecific, Evidence::DoNotNegotiateHeader));
        // without the header the shipped deny-list still catches the toolbar tree
        let c = classify_uri(uri, None, &cfg());
        assert_eq!(c, Classification::new(ClassificationValue::ArchiveSpecific, Evidence::ConfigDenyList));
    }

    #[test]
    fn live_web_script() {
        let c = classify_uri("http://cdn.projecthaile.com/js/trb-1.js", None, &cfg());
        assert_eq!(c, Classification::new(ClassificationValue::LiveWeb, Evidence::NoArchivePrefix));
        assert!(!needs_probe("http://cdn.projecthaile.com/js/trb-1.js", &cfg()));
    }

    #[test]
    fn memento_under_prefix() {
        let uri = "https://web.archive.org/web/20170717185130im_/https://climate.nasa.gov/system/charts/15_co2_left_061316.gif";
        let c = classify_uri(uri, None, &cfg());
        assert_eq!(c, Classification::new(ClassificationValue::ArchivedMemento, Evidence::UriPattern));
        assert!(!needs_probe(uri, &cfg()));
        assert!(needs_probe(
            "https://web.archive.org/web/20170717185130/https://climate.nasa.gov/",
            &cfg()
        ));
    }

    #[test]
    fn classification_invariants() {
        let probe = parse_link_header(r#"<http://mementoweb.org/terms/donotnegotiate>; rel="type""#).unwrap();
        for uri in [
            "https://web.archive.org/web/20170717185130/https://a.com/",
            "https://web.archive.org/_static/js/x.js",
            "http://cdn.projecthaile.com/js/trb-1.js",
            "https://web.archive.org/web/timemap/link/https://a.com/",
        ] {
            for p in [None, Some(&probe)] {
                let c = classify_uri(uri, p, &cfg());
                match c.value {
                    ClassificationValue::ArchiveSpecific => assert!(matches!(
                        c.evidence,
                        Evidence::DoNotNegotiateHeader | Evidence::ConfigDenyList
                    )),
                    ClassificationValue::LiveWeb => assert_eq!(c.evidence, Evidence::NoArchivePrefix),
                    ClassificationValue::ArchivedMemento => assert_eq!(c.evidence, Evidence::UriPattern),
                }
            }
        }
    }
}
