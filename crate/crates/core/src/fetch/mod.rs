//! Retrieval with cache avoidance and dynamism probing.

mod transport;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

pub use transport::{HttpRequest, HttpResponse, Method, ReqwestTransport, Transport};
pub(crate) use transport::header_value;

use crate::error::ConfigError;
use crate::protocol::{build_raw_uri, parse_http_datetime, parse_link_header, LinkRelationSet, MementoUri};

pub const MAX_CACHE_RETRIES: u32 = 10;
pub const MAX_REDIRECTS: usize = 5;
pub const CACHE_BUSTER_PARAM: &str = "_fixity_nocache";

fn default_user_agent() -> String {
    concat!("memento-fixity/", env!("CARGO_PKG_VERSION")).to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchPolicy {
    pub cache_retry_limit: u32,
    pub cache_bypass: bool,
    pub stability_probe: bool,
    pub stability_delay_ms: u64,
    pub request_timeout_ms: u64,
    pub user_agent: String,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            cache_retry_limit: 3,
            cache_bypass: true,
            stability_probe: true,
            stability_delay_ms: 1000,
            request_timeout_ms: 30_000,
            user_agent: default_user_agent(),
        }
    }
}

impl FetchPolicy {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cache_retry_limit > MAX_CACHE_RETRIES {
            return Err(ConfigError::Policy(format!(
                "cache_retry_limit {} exceeds the cap of {MAX_CACHE_RETRIES}",
                self.cache_retry_limit
            )));
        }
        if self.request_timeout_ms == 0 {
            return Err(ConfigError::Policy("request_timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let policy: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Json {
            path: path.display().to_string(),
            source,
        })?;
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PageCache {
    Hit,
    Miss,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Dynamic,
    Unprobed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectHop {
    pub uri: String,
    pub status: u16,
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResult {
    pub requested_uri: String,
    pub final_uri: String,
    pub status: u16,
    /// Final response headers, names lowercased.
    pub headers: Vec<(String, String)>,
    pub memento_datetime: Option<DateTime<Utc>>,
    /// The first `Location` seen along the redirect chain, verbatim.
    pub location: Option<String>,
    pub content_type: Option<String>,
    pub page_cache: PageCache,
    pub link_relations: LinkRelationSet,
    pub body: Vec<u8>,
    pub fetched_at: DateTime<Utc>,
    pub stability: Stability,
    pub hops: Vec<RedirectHop>,
    pub raw_used: bool,
    /// Set when the cache-busting query parameter had to be appended.
    pub cache_buster: Option<String>,
    pub attempts: u32,
}

impl FetchResult {
    pub fn header(&self, name: &str) -> Option<String> {
        header_value(&self.headers, name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FetchErrorKind {
    Timeout,
    ConnectionFailed,
    TooManyCacheHits,
    NonHttpScheme,
    TooManyRedirects,
    /// The final response had a 4xx or 5xx status.
    HttpStatus(u16),
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("fetching {uri}: {kind:?}: {detail}")]
pub struct FetchError {
    pub uri: String,
    pub kind: FetchErrorKind,
    pub detail: String,
}

impl FetchError {
    pub fn new(uri: &str, kind: FetchErrorKind, detail: impl Into<String>) -> Self {
        Self {
            uri: uri.to_string(),
            kind,
            detail: detail.into(),
        }
    }
}

/// Issues requests for one pipeline run. Per-URI operations are sequential;
/// distinct URIs may be fetched from multiple threads.
#[derive(Clone)]
pub struct Fetcher {
    transport: Arc<dyn Transport>,
    policy: FetchPolicy,
}

static BUSTER_SEQ: AtomicU64 = AtomicU64::new(0);

impl Fetcher {
    pub fn new(policy: FetchPolicy) -> Result<Self, FetchError> {
        let transport = ReqwestTransport::new(
            Duration::from_millis(policy.request_timeout_ms),
            &policy.user_agent,
        )?;
        Ok(Self::with_transport(Arc::new(transport), policy))
    }

    pub fn with_transport(transport: Arc<dyn Transport>, policy: FetchPolicy) -> Self {
        Self { transport, policy }
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    /// GET with cache avoidance.
    ///
    /// A `X-Page-Cache: HIT` response is re-requested with `no-cache` request
    /// headers up to `cache_retry_limit` times; the last retry also appends a
    /// unique throwaway query parameter. When every attempt is a hit the
    /// result is `TooManyCacheHits`. With `cache_bypass` off, hits are returned
    /// as served.
    pub fn fetch_resource(&self, uri: &str) -> Result<FetchResult, FetchError> {
        check_scheme(uri)?;
        let mut result = self.follow(uri, &[])?;
        result.attempts = 1;
        if result.page_cache != PageCache::Hit || !self.policy.cache_bypass {
            return Ok(result);
        }
        let bypass = [
            ("Cache-Control".to_string(), "no-cache".to_string()),
            ("Pragma".to_string(), "no-cache".to_string()),
        ];
        let limit = self.policy.cache_retry_limit.min(MAX_CACHE_RETRIES);
        for retry in 1..=limit {
            let (target, buster) = if retry == limit {
                let token = cache_buster_token();
                (append_query(uri, CACHE_BUSTER_PARAM, &token), Some(token))
            } else {
                (uri.to_string(), None)
            };
            let mut next = self.follow(&target, &bypass)?;
            next.requested_uri = uri.to_string();
            next.attempts = retry + 1;
            if next.page_cache != PageCache::Hit {
                next.cache_buster = buster;
                return Ok(next);
            }
        }
        Err(FetchError::new(
            uri,
            FetchErrorKind::TooManyCacheHits,
            format!("{} consecutive X-Page-Cache: HIT responses", limit + 1),
        ))
    }

    /// Two fetches separated by the policy delay. The first result is marked
    /// `Stable` iff both bodies are byte-equal and both statuses match.
    pub fn probe_stability(&self, uri: &str) -> Result<(FetchResult, FetchResult), FetchError> {
        let mut first = self.fetch_resource(uri)?;
        if self.policy.stability_delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.policy.stability_delay_ms));
        }
        let mut second = self.fetch_resource(uri)?;
        let stability = if first.body == second.body && first.status == second.status {
            Stability::Stable
        } else {
            Stability::Dynamic
        };
        first.stability = stability;
        second.stability = stability;
        Ok((first, second))
    }

    /// Fetches the `id_` form of `memento`.
    pub fn fetch_raw(&self, memento: &MementoUri) -> Result<FetchResult, FetchError> {
        let mut result = self.fetch_resource(&build_raw_uri(memento).to_string())?;
        result.raw_used = true;
        Ok(result)
    }

    /// `fetch_raw` followed by a stability probe when the policy asks for one.
    pub fn fetch_raw_probed(&self, memento: &MementoUri) -> Result<FetchResult, FetchError> {
        let uri = build_raw_uri(memento).to_string();
        let mut result = if self.policy.stability_probe {
            self.probe_stability(&uri)?.0
        } else {
            self.fetch_resource(&uri)?
        };
        result.raw_used = true;
        Ok(result)
    }

    /// Header-only probe used for classification: HEAD, falling back to GET
    /// when the server rejects HEAD.
    pub fn probe_links(&self, uri: &str) -> Result<LinkRelationSet, FetchError> {
        check_scheme(uri)?;
        let head = HttpRequest {
            method: Method::Head,
            uri: uri.to_string(),
            headers: vec![],
        };
        let mut response = self.transport.send(&head)?;
        if matches!(response.status, 405 | 501) {
            response = self.transport.send(&HttpRequest {
                method: Method::Get,
                ..head
            })?;
        }
        Ok(response
            .header("link")
            .and_then(|v| parse_link_header(&v).ok())
            .unwrap_or_default())
    }

    fn follow(&self, uri: &str, extra: &[(String, String)]) -> Result<FetchResult, FetchError> {
        let mut current = uri.to_string();
        let mut hops: Vec<RedirectHop> = Vec::new();
        let mut saw_hit = false;
        let mut saw_miss = false;
        loop {
            let request = HttpRequest {
                method: Method::Get,
                uri: current.clone(),
                headers: extra.to_vec(),
            };
            let response = self.transport.send(&request)?;
            match response.header("x-page-cache") {
                Some(v) if v.trim().eq_ignore_ascii_case("hit") => saw_hit = true,
                Some(v) if v.trim().eq_ignore_ascii_case("miss") => saw_miss = true,
                _ => {}
            }
            let location = response.header("location");
            if let (300..=399, Some(location)) = (response.status, location) {
                let next = resolve_location(&current, &location)
                    .ok_or_else(|| FetchError::new(uri, FetchErrorKind::ConnectionFailed, format!("unusable Location {location:?}")))?;
                hops.push(RedirectHop {
                    uri: current.clone(),
                    status: response.status,
                    location,
                });
                // cross-scheme hops are reported as the result, not followed
                if scheme_of(&next) == scheme_of(&current) {
                    if hops.len() > MAX_REDIRECTS {
                        return Err(FetchError::new(
                            uri,
                            FetchErrorKind::TooManyRedirects,
                            format!("more than {MAX_REDIRECTS} redirects"),
                        ));
                    }
                    current = next;
                    continue;
                }
            }
            if response.status >= 400 {
                return Err(FetchError::new(
                    uri,
                    FetchErrorKind::HttpStatus(response.status),
                    format!("final status {} from {current}", response.status),
                ));
            }
            let page_cache = if saw_hit {
                PageCache::Hit
            } else if saw_miss {
                PageCache::Miss
            } else {
                PageCache::Absent
            };
            let link_relations = response
                .header("link")
                .and_then(|v| parse_link_header(&v).ok())
                .unwrap_or_default();
            return Ok(FetchResult {
                requested_uri: uri.to_string(),
                final_uri: current,
                status: response.status,
                memento_datetime: response
                    .header("memento-datetime")
                    .and_then(|v| parse_http_datetime(v.trim()).ok()),
                location: hops.first().map(|h| h.location.clone()),
                content_type: response.header("content-type"),
                page_cache,
                link_relations,
                fetched_at: Utc::now(),
                stability: Stability::Unprobed,
                hops,
                raw_used: false,
                cache_buster: None,
                attempts: 1,
                headers: response.headers,
                body: response.body,
            });
        }
    }
}

fn check_scheme(uri: &str) -> Result<(), FetchError> {
    match Url::parse(uri) {
        Ok(u) if matches!(u.scheme(), "http" | "https") => Ok(()),
        _ => Err(FetchError::new(uri, FetchErrorKind::NonHttpScheme, "only http and https are fetched")),
    }
}

fn scheme_of(uri: &str) -> Option<String> {
    Url::parse(uri).ok().map(|u| u.scheme().to_string())
}

fn resolve_location(current: &str, location: &str) -> Option<String> {
    let base = Url::parse(current).ok()?;
    // URI-M paths embed "http://" which Url::join would normalize away
    if location.starts_with('/') && !location.starts_with("//") {
        return Some(format!("{}{}", origin_of(&base), location));
    }
    if Url::parse(location).is_ok() {
        return Some(location.to_string());
    }
    base.join(location).ok().map(|u| u.to_string())
}

fn origin_of(url: &Url) -> String {
    let mut origin = format!("{}://{}", url.scheme(), url.host_str().unwrap_or(""));
    if let Some(port) = url.port() {
        origin.push_str(&format!(":{port}"));
    }
    origin
}

fn append_query(uri: &str, key: &str, value: &str) -> String {
    let (base, fragment) = match uri.split_once('#') {
        Some((b, f)) => (b, Some(f)),
        None => (uri, None),
    };
    let sep = if base.contains('?') { '&' } else { '?' };
    let mut out = format!("{base}{sep}{key}={value}");
    if let Some(f) = fragment {
        out.push('#');
        out.push_str(f);
    }
    out
}

fn cache_buster_token() -> String {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or_default();
    let seq = BUSTER_SEQ.fetch_add(1, Ordering::Relaxed);
    format!("{nanos:x}{seq:x}")
}

#[cfg(test)]
pub(crate) mod testing {
    //! A scripted in-memory transport for unit tests.

    use std::collections::HashMap;
    use std::sync::Mutex;

    use super::*;

    type Responder = Box<dyn Fn(&HttpRequest, usize) -> HttpResponse + Send + Sync>;

    #[derive(Default)]
    pub struct ScriptedTransport {
        routes: HashMap<String, Responder>,
        pub log: Mutex<Vec<HttpRequest>>,
    }

    pub fn response(status: u16, headers: &[(&str, &str)], body: &[u8]) -> HttpResponse {
        HttpResponse {
            status,
            headers: headers
                .iter()
                .map(|(k, v)| (k.to_ascii_lowercase(), v.to_string()))
                .collect(),
            body: body.to_vec(),
        }
    }

    impl ScriptedTransport {
        /// `respond` receives the request and the zero-based count of earlier
        /// requests to the same route (query string ignored).
        pub fn route(
            mut self,
            uri: &str,
            respond: impl Fn(&HttpRequest, usize) -> HttpResponse + Send + Sync + 'static,
        ) -> Self {
            self.routes.insert(uri.to_string(), Box::new(respond));
            self
        }

        pub fn requests_to(&self, uri: &str) -> usize {
            self.log
                .lock()
                .unwrap()
                .iter()
                .filter(|r| route_key(&r.uri) == uri)
                .count()
        }
    }

    fn route_key(uri: &str) -> &str {
        uri.split('?').next().unwrap_or(uri)
    }

    impl Transport for ScriptedTransport {
        fn send(&self, request: &HttpRequest) -> Result<HttpResponse, FetchError> {
            let key = route_key(&request.uri).to_string();
            let seen = self.requests_to(&key);
            self.log.lock().unwrap().push(request.clone());
            match self.routes.get(&key) {
                Some(respond) => Ok(respond(request, seen)),
                None => Ok(response(404, &[], b"not found")),
            }
        }
    }
}
