use std::collections::{HashMap, HashSet};
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;

use axum::body::Body;
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, Method, Response, StatusCode, Uri};
use axum::Router;
use memento_fixity::extract::DocumentKind;
use memento_fixity::protocol::{format_http_datetime, parse_timestamp14, MementoUri, Modifier, DO_NOT_NEGOTIATE};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use crate::render::{inject_banner, rewrite_css, rewrite_html, Banner, ReplayContext, BANNER_SCRIPT, TOOLBAR_LOGO};
use crate::scenario::{CacheMark, Scenario};

pub const CACHE_BUSTER_PARAM: &str = memento_fixity::fetch::CACHE_BUSTER_PARAM;

/// One request as seen by the server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub method: String,
    /// Host the request was addressed to; differs from the server's own
    /// address when the server was used as a proxy.
    pub host: String,
    pub path: String,
    pub proxied: bool,
    pub status: u16,
}

/// A cached copy: body and content type.
type Cached = (Arc<Vec<u8>>, String);

#[derive(Debug, Default)]
struct Mutable {
    /// GET count per resource index.
    requests: HashMap<usize, u64>,
    /// Last miss per (resource, raw) variant.
    cache: HashMap<(usize, bool), Cached>,
    fired: HashSet<String>,
    banner_version: u32,
    timemap_state: HashMap<String, usize>,
    log: Vec<Hit>,
}

struct Shared {
    scenario: Scenario,
    port: u16,
    state: Mutex<Mutable>,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Mutable> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn reset(&self) {
        *self.lock() = Mutable {
            banner_version: self.scenario.spec.banner_version,
            ..Mutable::default()
        };
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown control event {0:?}")]
pub struct UnknownEvent(pub String);

/// A running fixture archive. Dropping the handle stops the server.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// The replay prefix, e.g. `http://127.0.0.1:8080/web/`.
    pub fn prefix(&self) -> String {
        format!("{}/web/", self.base_url())
    }

    /// Replay URI-M of the scenario root.
    pub fn root_uri(&self) -> String {
        let root = self.shared.scenario.root();
        format!("{}{}/{}", self.prefix(), root.spec.timestamp, root.spec.uri_r)
    }

    pub fn timemap_uri(&self, uri_r: &str) -> String {
        format!("{}timemap/link/{uri_r}", self.prefix())
    }

    pub fn scenario(&self) -> &Scenario {
        &self.shared.scenario
    }

    pub fn hits(&self) -> Vec<Hit> {
        self.shared.lock().log.clone()
    }

    /// Same as `POST /_control/<event>`.
    pub fn fire(&self, event: &str) -> Result<(), UnknownEvent> {
        control(&self.shared, event)
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `addr` and serves `scenario` on a background thread.
pub fn serve(scenario: Scenario, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        scenario,
        port: addr.port(),
        state: Mutex::new(Mutable::default()),
    });
    shared.reset();

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = Router::new().fallback(handle).with_state(shared.clone());
    let listener = {
        let _guard = runtime.enter();
        tokio::net::TcpListener::from_std(listener)?
    };
    let thread = std::thread::Builder::new()
        .name(format!("archive-sim-{}", addr.port()))
        .spawn(move || {
            runtime.block_on(async move {
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        })?;
    Ok(ServerHandle {
        addr,
        shared,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

fn control(shared: &Shared, event: &str) -> Result<(), UnknownEvent> {
    match event {
        "reset" => {
            shared.reset();
            return Ok(());
        }
        "bump-banner" => {
            shared.lock().banner_version += 1;
            return Ok(());
        }
        _ => {}
    }
    let scenario = &shared.scenario;
    if let Some(tm) = scenario.spec.timemaps.iter().find(|t| t.event == event) {
        let mut state = shared.lock();
        let current = state.timemap_state.entry(tm.uri_r.clone()).or_default();
        *current = (*current + 1).min(tm.states.len() - 1);
        return Ok(());
    }
    if scenario.events().iter().any(|e| e == event) {
        shared.lock().fired.insert(event.to_string());
        return Ok(());
    }
    Err(UnknownEvent(event.to_string()))
}

type Reply = Response<Body>;

fn reply(status: StatusCode, content_type: &str, body: impl Into<Body>) -> Reply {
    let mut r = Response::new(body.into());
    *r.status_mut() = status;
    r.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_str(content_type).unwrap_or(HeaderValue::from_static("application/octet-stream")));
    r
}

fn not_found(what: &str) -> Reply {
    reply(StatusCode::NOT_FOUND, "text/plain", format!("not in this archive: {what}\n"))
}

async fn handle(State(shared): State<Arc<Shared>>, method: Method, uri: Uri, headers: HeaderMap) -> Reply {
    let host_header = headers
        .get(header::HOST)
        .and_then(|h| h.to_str().ok())
        .unwrap_or("")
        .to_string();
    let proxied = uri.authority().is_some() || !host_header.ends_with(&format!(":{}", shared.port));
    let host = uri
        .authority()
        .map(|a| a.to_string())
        .unwrap_or(host_header);
    let path = uri.path_and_query().map(|p| p.to_string()).unwrap_or_else(|| "/".into());

    let mut response = if proxied {
        live(&shared, &uri, &host, &path)
    } else {
        route(&shared, &method, &host, &path, &headers)
    };
    if method == Method::HEAD {
        *response.body_mut() = Body::empty();
    }
    if !path.starts_with("/_control/") || proxied {
        shared.lock().log.push(Hit {
            method: method.to_string(),
            host,
            path,
            proxied,
            status: response.status().as_u16(),
        });
    }
    response
}

/// A request that reached the server as a proxy: the live web.
fn live(shared: &Shared, uri: &Uri, host: &str, path: &str) -> Reply {
    let full = if uri.scheme().is_some() {
        uri.to_string()
    } else {
        format!("http://{host}{path}")
    };
    match shared.scenario.live_leaks.iter().find(|l| l.spec.uri == full) {
        Some(leak) => reply(StatusCode::OK, &leak.spec.content_type, leak.body.as_ref().clone()),
        None => reply(StatusCode::BAD_GATEWAY, "text/plain", format!("no live copy of {full}\n")),
    }
}

fn route(shared: &Shared, method: &Method, host: &str, path: &str, headers: &HeaderMap) -> Reply {
    if let Some(event) = path.strip_prefix("/_control/") {
        return match (method, event) {
            (&Method::GET, "hits") => {
                let log = shared.lock().log.clone();
                reply(StatusCode::OK, "application/json", serde_json::to_vec(&log).unwrap_or_default())
            }
            (&Method::POST, event) => match control(shared, event) {
                Ok(()) => reply(StatusCode::OK, "application/json", format!("{{\"event\":{event:?}}}\n")),
                Err(e) => reply(StatusCode::NOT_FOUND, "text/plain", format!("{e}\n")),
            },
            _ => reply(StatusCode::METHOD_NOT_ALLOWED, "text/plain", "control events are POSTed\n"),
        };
    }
    if !matches!(*method, Method::GET | Method::HEAD) {
        return reply(StatusCode::METHOD_NOT_ALLOWED, "text/plain", "read-only archive\n");
    }
    if path.split('?').next() == Some(BANNER_SCRIPT) {
        return reply(StatusCode::OK, "application/javascript", "/* archive toolbar */\n");
    }
    if path == TOOLBAR_LOGO {
        let mut r = reply(StatusCode::OK, "image/png", b"\x89PNG\r\n\x1a\ntoolbar".to_vec());
        r.headers_mut().insert(
            header::LINK,
            HeaderValue::from_str(&format!("<{DO_NOT_NEGOTIATE}>; rel=\"type\"")).unwrap(),
        );
        return r;
    }
    if let Some(uri_r) = path.strip_prefix("/web/timemap/link/") {
        return timemap(shared, host, uri_r);
    }
    if path.starts_with("/web/") {
        return memento(shared, method, host, path, headers);
    }
    not_found(path)
}

fn timemap(shared: &Shared, host: &str, uri_r: &str) -> Reply {
    let scenario = &shared.scenario;
    let timestamps: Vec<String> = match scenario.spec.timemaps.iter().find(|t| t.uri_r == uri_r) {
        Some(tm) => {
            let index = shared.lock().timemap_state.get(uri_r).copied().unwrap_or(0);
            tm.states[index].clone()
        }
        None => {
            let captures = scenario.captures_of(uri_r);
            if captures.is_empty() {
                return not_found(uri_r);
            }
            captures
                .iter()
                .map(|&i| scenario.resources[i].spec.timestamp.clone())
                .collect()
        }
    };
    let mut timestamps = timestamps;
    timestamps.sort();
    let mut lines = vec![
        format!("<{uri_r}>; rel=\"original\""),
        format!("<http://{host}/web/timemap/link/{uri_r}>; rel=\"self\"; type=\"application/link-format\""),
    ];
    let n = timestamps.len();
    for (i, ts) in timestamps.iter().enumerate() {
        let rel = match (i == 0, i + 1 == n) {
            (true, true) => "first last memento",
            (true, false) => "first memento",
            (false, true) => "last memento",
            _ => "memento",
        };
        let datetime = parse_timestamp14(ts).map(|dt| format_http_datetime(&dt)).unwrap_or_default();
        lines.push(format!("<http://{host}/web/{ts}/{uri_r}>; rel=\"{rel}\"; datetime=\"{datetime}\""));
    }
    reply(StatusCode::OK, "application/link-format", lines.join(",\n") + "\n")
}

/// Splits the cache-busting parameter off a query string.
fn strip_buster(path: &str) -> (String, bool) {
    let Some((base, query)) = path.split_once('?') else {
        return (path.to_string(), false);
    };
    let mut busted = false;
    let kept: Vec<&str> = query
        .split('&')
        .filter(|kv| {
            let is_buster = kv.split('=').next() == Some(CACHE_BUSTER_PARAM);
            busted |= is_buster;
            !is_buster
        })
        .collect();
    if kept.is_empty() {
        (base.to_string(), busted)
    } else {
        (format!("{base}?{}", kept.join("&")), busted)
    }
}

fn memento(shared: &Shared, method: &Method, host: &str, path: &str, headers: &HeaderMap) -> Reply {
    let scenario = &shared.scenario;
    let (path, busted) = strip_buster(path);
    let Ok(m) = MementoUri::infer(&format!("http://{host}{path}")) else {
        return not_found(&path);
    };
    let uri_r = m.target().as_str();
    let captures = scenario.captures_of(uri_r);
    if captures.is_empty() {
        return not_found(uri_r);
    }
    let exact = captures
        .iter()
        .copied()
        .find(|&i| scenario.resources[i].spec.timestamp == m.timestamp());
    let Some(index) = exact else {
        // nearest capture, earlier one on ties
        let wanted = m.datetime();
        let nearest = captures
            .iter()
            .copied()
            .min_by_key(|&i| {
                let ts = parse_timestamp14(&scenario.resources[i].spec.timestamp).unwrap_or(wanted);
                ((ts - wanted).num_seconds().abs(), ts)
            })
            .expect("non-empty");
        let target = &scenario.resources[nearest].spec;
        let location = format!("/web/{}{}/{}", target.timestamp, m.modifier().as_str(), target.uri_r);
        let mut r = reply(StatusCode::FOUND, "text/plain", Body::empty());
        r.headers_mut()
            .insert(header::LOCATION, HeaderValue::from_str(&location).unwrap());
        return r;
    };

    let resource = &scenario.resources[index];
    let raw = *m.modifier() == Modifier::Raw;
    if raw && !resource.spec.raw_available {
        return not_found(&format!("raw content of {uri_r}"));
    }

    let mut state = shared.lock();
    let n = if *method == Method::GET {
        let n = state.requests.entry(index).or_default();
        *n += 1;
        *n
    } else {
        state.requests.get(&index).copied().unwrap_or(0) + 1
    };
    let tampered = resource.spec.tamper.as_ref().is_some_and(|t| {
        t.after_requests.is_some_and(|k| n > k) || t.event.as_ref().is_some_and(|e| state.fired.contains(e))
    });

    let mut content_type = resource.spec.content_type.clone();
    let mut body = if !resource.dynamic.is_empty() {
        resource.dynamic[((n - 1) as usize) % resource.dynamic.len()].clone()
    } else if raw {
        resource.raw.clone()
    } else {
        resource.body.clone()
    };
    if tampered {
        let t = resource.spec.tamper.as_ref().expect("tampered implies spec");
        if let Some(b) = &resource.tamper_body {
            body = b.clone();
        }
        if let Some(ct) = &t.content_type {
            content_type = ct.clone();
        }
    }

    if !raw {
        let is_archived = |u: &str| !scenario.captures_of(u).is_empty();
        let ctx = ReplayContext {
            uri_r,
            timestamp: &resource.spec.timestamp,
            is_archived: &is_archived,
        };
        body = Arc::new(match DocumentKind::from_content_type(&content_type) {
            DocumentKind::Html => {
                let rewritten = rewrite_html(&body, &ctx);
                let banner = Banner {
                    version: state.banner_version,
                    captures: captures.len() + state.banner_version as usize - 1,
                    archived_on: m.datetime().format("%H:%M:%S %b %-d, %Y").to_string(),
                };
                inject_banner(&rewritten, &banner)
            }
            DocumentKind::Css => rewrite_css(&body, &ctx),
            DocumentKind::Other => body.as_ref().clone(),
        });
    }

    let mut cache_header = None;
    if !resource.spec.cache_script.is_empty() && *method == Method::GET {
        let mark = resource.spec.cache_script[((n - 1) as usize) % resource.spec.cache_script.len()];
        let no_cache = headers.get_all(header::CACHE_CONTROL).iter().chain(headers.get_all(header::PRAGMA).iter())
            .any(|v| v.to_str().is_ok_and(|v| v.to_ascii_lowercase().contains("no-cache")));
        let forced_miss = busted || (no_cache && resource.spec.honor_no_cache);
        let key = (index, raw);
        match (mark, forced_miss, state.cache.get(&key)) {
            (CacheMark::Hit, false, Some((cached, ct))) => {
                body = cached.clone();
                content_type = ct.clone();
                cache_header = Some("HIT");
            }
            (CacheMark::Hit, false, None) => {
                state.cache.insert(key, (body.clone(), content_type.clone()));
                cache_header = Some("HIT");
            }
            _ => {
                state.cache.insert(key, (body.clone(), content_type.clone()));
                cache_header = Some("MISS");
            }
        }
    } else if !resource.spec.cache_script.is_empty() {
        cache_header = Some("MISS");
    }
    drop(state);

    let mut r = reply(StatusCode::OK, &content_type, body.as_ref().clone());
    let h = r.headers_mut();
    if let Some(dt) = parse_timestamp14(&resource.spec.timestamp) {
        h.insert("memento-datetime", HeaderValue::from_str(&format_http_datetime(&dt)).unwrap());
    }
    let mut link = format!(
        "<{uri_r}>; rel=\"original\", <http://{host}/web/timemap/link/{uri_r}>; rel=\"timemap\"; type=\"application/link-format\""
    );
    if resource.spec.donotnegotiate {
        link.push_str(&format!(", <{DO_NOT_NEGOTIATE}>; rel=\"type\""));
    }
    if let Ok(v) = HeaderValue::from_str(&link) {
        h.insert(header::LINK, v);
    }
    if let Some(c) = cache_header {
        h.insert("x-page-cache", HeaderValue::from_static(c));
    }
    r
}
