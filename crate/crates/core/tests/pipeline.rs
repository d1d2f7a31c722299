//! The public pipeline against an in-memory archive.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use memento_fixity::extract::ExpandOptions;
use memento_fixity::fetch::{HttpRequest, HttpResponse, Method, Transport};
use memento_fixity::fixity::{compare_manifests, hash_composite_memento, ExclusionReason, Verdict};
use memento_fixity::{ArchiveConfig, FetchError, FetchPolicy, Fetcher, HashProfile, MementoUri};

const PREFIX: &str = "http://archive.test/web/";
const TS: &str = "20170717185130";

/// Serves `/web/<ts><mod>/<uri-r>` from a map keyed by URI-R, ignoring the
/// modifier. A `rotate` entry alternates between two bodies on each GET.
#[derive(Default)]
struct MemoryArchive {
    pages: HashMap<String, (&'static str, Vec<u8>)>,
    rotate: HashMap<String, ([Vec<u8>; 2], AtomicUsize)>,
}

impl MemoryArchive {
    fn page(mut self, uri_r: &str, content_type: &'static str, body: &str) -> Self {
        self.pages.insert(uri_r.into(), (content_type, body.as_bytes().to_vec()));
        self
    }
}

impl Transport for MemoryArchive {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, FetchError> {
        let not_found = HttpResponse {
            status: 404,
            headers: vec![],
            body: vec![],
        };
        let Some(rest) = request.uri.strip_prefix(PREFIX) else {
            return Ok(not_found);
        };
        let Some((_, uri_r)) = rest.split_once('/') else {
            return Ok(not_found);
        };
        let headers = |ct: &str| {
            vec![
                ("content-type".to_string(), ct.to_string()),
                ("memento-datetime".to_string(), "Mon, 17 Jul 2017 18:51:30 GMT".to_string()),
            ]
        };
        if let Some((bodies, gets)) = self.rotate.get(uri_r) {
            let n = if request.method == Method::Get {
                gets.fetch_add(1, Ordering::SeqCst)
            } else {
                0
            };
            return Ok(HttpResponse {
                status: 200,
                headers: headers("image/png"),
                body: bodies[n % 2].clone(),
            });
        }
        Ok(match self.pages.get(uri_r) {
            Some((ct, body)) => HttpResponse {
                status: 200,
                headers: headers(ct),
                body: body.clone(),
            },
            None => not_found,
        })
    }
}

fn site() -> MemoryArchive {
    let img = format!("{PREFIX}{TS}im_/http://a.test/chart.gif");
    let css = format!("{PREFIX}{TS}cs_/http://a.test/site.css");
    MemoryArchive::default()
        .page(
            "http://a.test/",
            "text/html",
            &format!(r#"<html><head><link rel="stylesheet" href="{css}"></head><body><img src="{img}"></body></html>"#),
        )
        .page("http://a.test/chart.gif", "image/gif", "GIF89a chart")
        .page("http://a.test/site.css", "text/css", &format!("body {{ background: url({PREFIX}{TS}im_/http://a.test/bg.png) }}"))
        .page("http://a.test/bg.png", "image/png", "PNG bg")
}

fn run(archive: Arc<MemoryArchive>, policy: FetchPolicy) -> memento_fixity::FixityManifest {
    let root = MementoUri::infer(&format!("{PREFIX}{TS}/http://a.test/")).unwrap();
    let fetcher = Fetcher::with_transport(archive, policy);
    let config = ArchiveConfig::with_prefixes([PREFIX]);
    hash_composite_memento(&root, &fetcher, &HashProfile::default(), &config, &ExpandOptions::default()).unwrap()
}

fn policy(delay_ms: u64) -> FetchPolicy {
    FetchPolicy {
        stability_delay_ms: delay_ms,
        ..FetchPolicy::default()
    }
}

#[test]
fn nested_resources_are_recorded_and_repeatable() {
    let a = run(Arc::new(site()), policy(0));
    let b = run(Arc::new(site()), policy(0));
    let targets: Vec<&str> = a.records.iter().map(|r| r.target.as_str()).collect();
    assert_eq!(
        targets,
        ["http://a.test/", "http://a.test/bg.png", "http://a.test/chart.gif", "http://a.test/site.css"]
    );
    assert_eq!(a.aggregate_hash, b.aggregate_hash);
    assert_eq!(compare_manifests(&a, &b).unwrap().verdict, Verdict::Match);
}

#[test]
fn stability_delay_is_paid_once_per_run() {
    // three levels deep: page, stylesheet, background image
    let delay = 300;
    let t = Instant::now();
    let m = run(Arc::new(site()), policy(delay));
    let elapsed = t.elapsed();
    assert_eq!(m.records.len(), 4);
    assert!(elapsed >= Duration::from_millis(delay));
    assert!(elapsed < Duration::from_millis(2 * delay), "{elapsed:?}");
}

#[test]
fn rotating_resource_is_dynamic() {
    let mut archive = site();
    archive.pages.insert(
        "http://a.test/".into(),
        ("text/html", format!(r#"<img src="{PREFIX}{TS}im_/http://a.test/icon.png">"#).into_bytes()),
    );
    archive.rotate.insert("http://a.test/icon.png".into(), ([b"icon-a".to_vec(), b"icon-b".to_vec()], AtomicUsize::new(0)));
    let archive = Arc::new(archive);
    let first = run(archive.clone(), policy(0));
    let second = run(archive, policy(0));
    let icon = first.excluded.iter().find(|e| e.uri.contains("icon.png")).unwrap();
    assert_eq!(icon.reason, ExclusionReason::Dynamic);
    assert_eq!(first.aggregate_hash, second.aggregate_hash);
}

#[test]
fn edited_body_is_tampered() {
    let before = run(Arc::new(site()), policy(0));
    let after = run(Arc::new(site().page("http://a.test/chart.gif", "image/gif", "GIF89a edited")), policy(0));
    let report = compare_manifests(&before, &after).unwrap();
    assert_eq!(report.verdict, Verdict::Tampered);
    assert_eq!(report.changed.len(), 1);
    assert_eq!(report.changed[0].target, "http://a.test/chart.gif");
}
