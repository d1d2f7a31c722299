use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use memento_fixity::extract::{discover_resources, DocumentKind};
use memento_fixity::protocol::{parse_timestamp14, OriginalUri};
use serde::{Deserialize, Serialize};

/// Events the server handles itself; scenarios cannot redefine them.
pub const BUILTIN_EVENTS: &[&str] = &["reset", "bump-banner", "hits"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CacheMark {
    #[serde(rename = "HIT")]
    Hit,
    #[serde(rename = "MISS")]
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TamperSpec {
    #[serde(default)]
    pub body: Option<PathBuf>,
    #[serde(default)]
    pub content_type: Option<String>,
    /// Requests numbered above this count are served tampered.
    #[serde(default)]
    pub after_requests: Option<u64>,
    /// Control event that switches the tamper on.
    #[serde(default)]
    pub event: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSpec {
    pub uri_r: String,
    pub timestamp: String,
    pub body: PathBuf,
    pub content_type: String,
    /// Served for `id_` requests instead of `body`.
    #[serde(default)]
    pub raw_body: Option<PathBuf>,
    #[serde(default = "yes")]
    pub raw_available: bool,
    #[serde(default)]
    pub donotnegotiate: bool,
    #[serde(default)]
    pub cache_script: Vec<CacheMark>,
    /// Whether `Cache-Control: no-cache` forces a miss. The cache-busting
    /// query parameter always does.
    #[serde(default = "yes")]
    pub honor_no_cache: bool,
    #[serde(default)]
    pub dynamic_cycle: Vec<PathBuf>,
    #[serde(default)]
    pub tamper: Option<TamperSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveLeakSpec {
    pub uri: String,
    #[serde(default)]
    pub body: Option<PathBuf>,
    pub content_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeMapSpec {
    pub uri_r: String,
    /// Successive lists of 14-digit timestamps.
    pub states: Vec<Vec<String>>,
    /// Control event that advances to the next state.
    pub event: String,
}

/// A scenario file as written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// URI-R of the page a pipeline run starts from.
    pub root: String,
    pub resources: Vec<ResourceSpec>,
    #[serde(default)]
    pub live_leaks: Vec<LiveLeakSpec>,
    #[serde(default)]
    pub timemaps: Vec<TimeMapSpec>,
    #[serde(default = "one")]
    pub banner_version: u32,
    /// References in bodies that deliberately resolve to nothing.
    #[serde(default)]
    pub dangling: Vec<String>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resource {
    pub spec: ResourceSpec,
    pub body: Arc<Vec<u8>>,
    pub raw: Arc<Vec<u8>>,
    pub dynamic: Vec<Arc<Vec<u8>>>,
    pub tamper_body: Option<Arc<Vec<u8>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiveLeak {
    pub spec: LiveLeakSpec,
    pub body: Arc<Vec<u8>>,
}

/// A validated scenario with all bodies loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub resources: Vec<Resource>,
    pub live_leaks: Vec<LiveLeak>,
    /// Directory relative body paths were resolved against.
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn root(&self) -> &Resource {
        self.resources
            .iter()
            .find(|r| r.spec.uri_r == self.spec.root)
            .expect("validated scenario declares its root")
    }

    /// Indexes of the declared captures of `uri_r`.
    pub fn captures_of(&self, uri_r: &str) -> Vec<usize> {
        (0..self.resources.len())
            .filter(|&i| self.resources[i].spec.uri_r == uri_r)
            .collect()
    }

    pub fn events(&self) -> Vec<String> {
        let mut events: Vec<String> = self
            .resources
            .iter()
            .filter_map(|r| r.spec.tamper.as_ref()?.event.clone())
            .chain(self.spec.timemaps.iter().map(|t| t.event.clone()))
            .collect();
        events.sort();
        events.dedup();
        events
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ScenarioInvalid {
    pub path: PathBuf,
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ScenarioInvalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            match d.line {
                Some(line) => write!(f, "{}:{line}: {}", self.path.display(), d.message)?,
                None => write!(f, "{}: {}", self.path.display(), d.message)?,
            }
        }
        Ok(())
    }
}

/// Reads and cross-checks a scenario file. Body paths are relative to the
/// file's directory.
pub fn validate_scenario(path: &Path) -> Result<Scenario, ScenarioInvalid> {
    let invalid = |diagnostics| ScenarioInvalid {
        path: path.to_path_buf(),
        diagnostics,
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        invalid(vec![Diagnostic {
            line: None,
            message: format!("cannot read scenario: {e}"),
        }])
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario(&text, &base_dir).map_err(invalid)
}

/// Validates scenario text, resolving body paths against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, Vec<Diagnostic>> {
    let spec: ScenarioSpec = serde_json::from_str(text).map_err(|e| {
        vec![Diagnostic {
            line: Some(e.line()),
            message: e.to_string(),
        }]
    })?;
    let mut errors = Vec::new();
    let mut error = |needle: &str, message: String| {
        errors.push(Diagnostic {
            line: line_of(text, needle),
            message,
        })
    };
    let read = |file: &Path, error: &mut dyn FnMut(&str, String)| -> Arc<Vec<u8>> {
        match std::fs::read(base_dir.join(file)) {
            Ok(bytes) => Arc::new(bytes),
            Err(e) => {
                let shown = file.display().to_string();
                error(&shown, format!("body file {shown:?} ({}): {e}", base_dir.join(file).display()));
                Arc::new(Vec::new())
            }
        }
    };

    if spec.name.trim().is_empty() {
        error("\"name\"", "name must not be empty".into());
    }
    if spec.banner_version == 0 {
        error("banner_version", "banner_version starts at 1".into());
    }

    let mut routes = HashSet::new();
    let mut resources = Vec::new();
    for r in &spec.resources {
        if OriginalUri::parse(&r.uri_r).is_err() {
            error(&r.uri_r, format!("uri_r {:?} is not an absolute http(s) URI", r.uri_r));
        }
        if parse_timestamp14(&r.timestamp).is_none() {
            error(&r.timestamp, format!("timestamp {:?} is not a 14-digit datetime", r.timestamp));
        }
        if !routes.insert((r.uri_r.clone(), r.timestamp.clone())) {
            error(
                &r.uri_r,
                format!("route /web/{}/{} is declared twice", r.timestamp, r.uri_r),
            );
        }
        let body = read(&r.body, &mut error);
        let raw = match &r.raw_body {
            Some(p) => read(p, &mut error),
            None => body.clone(),
        };
        let dynamic = r.dynamic_cycle.iter().map(|p| read(p, &mut error)).collect();
        let mut tamper_body = None;
        if let Some(t) = &r.tamper {
            if t.body.is_none() && t.content_type.is_none() {
                error(&r.uri_r, format!("tamper for {} changes nothing", r.uri_r));
            }
            if t.after_requests.is_none() && t.event.is_none() {
                error(&r.uri_r, format!("tamper for {} has no trigger", r.uri_r));
            }
            if let Some(e) = &t.event {
                if BUILTIN_EVENTS.contains(&e.as_str()) {
                    error(e, format!("event name {e:?} is reserved"));
                }
            }
            tamper_body = t.body.as_ref().map(|p| read(p, &mut error));
        }
        resources.push(Resource {
            spec: r.clone(),
            body,
            raw,
            dynamic,
            tamper_body,
        });
    }
    if !spec.resources.iter().any(|r| r.uri_r == spec.root) {
        error("\"root\"", format!("root {:?} is not a declared resource", spec.root));
    } else if spec.resources.iter().filter(|r| r.uri_r == spec.root).count() > 1 {
        error("\"root\"", format!("root {:?} has more than one capture", spec.root));
    }

    let mut live_leaks = Vec::new();
    for leak in &spec.live_leaks {
        if OriginalUri::parse(&leak.uri).is_err() {
            error(&leak.uri, format!("live leak {:?} is not an absolute http(s) URI", leak.uri));
        }
        if spec.resources.iter().any(|r| r.uri_r == leak.uri) {
            error(&leak.uri, format!("{} is both archived and a live leak", leak.uri));
        }
        let body = match &leak.body {
            Some(p) => read(p, &mut error),
            None => Arc::new(format!("/* live copy of {} */\n", leak.uri).into_bytes()),
        };
        live_leaks.push(LiveLeak {
            spec: leak.clone(),
            body,
        });
    }

    let mut events: BTreeMap<&str, usize> = BTreeMap::new();
    for tm in &spec.timemaps {
        if OriginalUri::parse(&tm.uri_r).is_err() {
            error(&tm.uri_r, format!("timemap uri_r {:?} is not an absolute http(s) URI", tm.uri_r));
        }
        if tm.states.is_empty() {
            error(&tm.uri_r, format!("timemap for {} has no states", tm.uri_r));
        }
        for ts in tm.states.iter().flatten() {
            if parse_timestamp14(ts).is_none() {
                error(ts, format!("timemap timestamp {ts:?} is not a 14-digit datetime"));
            }
        }
        if BUILTIN_EVENTS.contains(&tm.event.as_str()) {
            error(&tm.event, format!("event name {:?} is reserved", tm.event));
        }
        *events.entry(&tm.event).or_default() += 1;
    }
    for (event, n) in events {
        if n > 1 {
            error(event, format!("timemap event {event:?} is used by {n} timemaps"));
        }
    }

    // every reference in an archived document must be declared or flagged
    let known: HashSet<&str> = spec
        .resources
        .iter()
        .map(|r| r.uri_r.as_str())
        .chain(spec.live_leaks.iter().map(|l| l.uri.as_str()))
        .chain(spec.dangling.iter().map(String::as_str))
        .collect();
    for r in &resources {
        let bodies = std::iter::once(&r.body)
            .chain(std::iter::once(&r.raw))
            .chain(r.dynamic.iter())
            .chain(r.tamper_body.iter());
        for body in bodies {
            if DocumentKind::from_content_type(&r.spec.content_type) == DocumentKind::Other {
                continue;
            }
            let found = discover_resources(body, &r.spec.content_type, &r.spec.uri_r, 0);
            for d in found.resources {
                if !known.contains(d.resolved_uri.as_str()) {
                    error(
                        &r.spec.uri_r,
                        format!(
                            "{} references undeclared {} (declare it or list it under \"dangling\")",
                            r.spec.uri_r, d.resolved_uri
                        ),
                    );
                }
            }
        }
    }

    if errors.is_empty() {
        Ok(Scenario {
            spec,
            resources,
            live_leaks,
            base_dir: base_dir.to_path_buf(),
        })
    } else {
        errors.dedup();
        Err(errors)
    }
}

fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.lines().position(|l| l.contains(needle)).map(|i| i + 1)
}
