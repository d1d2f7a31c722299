//! A deterministic replay archive built from scenario files.
//!
//! Serves `/web/<ts14><mod>/<uri-r>` with link rewriting and an injected
//! banner (`id_` returns the archived bytes untouched), TimeMaps under
//! `/web/timemap/link/<uri-r>`, and a `POST /_control/<event>` endpoint that
//! switches tampering, banner versions and TimeMap states. Requests that
//! arrive in proxy form are answered as the live web and logged, so tests can
//! prove a resource was never fetched.

mod render;
mod scenario;
mod server;

pub use render::{Banner, BANNER_SCRIPT, TOOLBAR_LOGO};
pub use scenario::{
    parse_scenario, validate_scenario, CacheMark, Diagnostic, LiveLeakSpec, Resource, ResourceSpec, Scenario,
    ScenarioInvalid, ScenarioSpec, TamperSpec, TimeMapSpec, BUILTIN_EVENTS,
};
pub use server::{serve, Hit, ServerHandle, UnknownEvent};
