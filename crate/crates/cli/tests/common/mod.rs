#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use memento_fixity::FixityManifest;
use memento_fixity_sim::{serve, validate_scenario, ServerHandle};
use tempfile::TempDir;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn scenario_path(name: &str) -> PathBuf {
    fixtures().join(name).join("scenario.json")
}

pub fn start(name: &str) -> ServerHandle {
    let scenario = validate_scenario(&scenario_path(name)).unwrap_or_else(|e| panic!("{e}"));
    serve(scenario, SocketAddr::from(([127, 0, 0, 1], 0))).unwrap()
}

/// The CLI with proxies cleared, so runs never depend on the caller's
/// environment.
pub fn cli() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_memento-fixity"));
    for var in ["HTTP_PROXY", "http_proxy", "HTTPS_PROXY", "https_proxy", "ALL_PROXY", "all_proxy", "LEDGER_PATH"] {
        cmd.env_remove(var);
    }
    cmd.env("NO_PROXY", "*");
    cmd
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn memento-fixity")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn describe(out: &Output) -> String {
    format!(
        "exit {:?}\n--- stdout\n{}--- stderr\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

/// A scratch directory plus a counter for manifest names. Hash runs use a
/// short stability delay unless built with `default_policy`.
pub struct Work {
    pub dir: TempDir,
    n: std::cell::Cell<u32>,
    fast: bool,
}

impl Work {
    pub fn new() -> Self {
        Work {
            dir: tempfile::tempdir().unwrap(),
            n: std::cell::Cell::new(0),
            fast: true,
        }
    }

    pub fn default_policy() -> Self {
        Work { fast: false, ..Work::new() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Runs `hash` with extra flags, returning the manifest path and the
    /// parsed manifest. Panics unless the command exits 0.
    pub fn hash(&self, uri: &str, extra: &[&str]) -> (PathBuf, FixityManifest) {
        self.hash_with(cli(), uri, extra)
    }

    pub fn hash_with(&self, mut cmd: Command, uri: &str, extra: &[&str]) -> (PathBuf, FixityManifest) {
        self.n.set(self.n.get() + 1);
        let out_path = self.path(&format!("manifest-{}.json", self.n.get()));
        cmd.arg("hash").arg(uri).arg("--out").arg(&out_path);
        if self.fast {
            cmd.args(["--stability-delay-ms", "20"]);
        }
        let out = run(cmd.args(extra));
        assert_eq!(out.status.code(), Some(0), "{}", describe(&out));
        let manifest = FixityManifest::load(&out_path).unwrap();
        assert!(
            stdout(&out).contains(&format!("aggregate: {}", manifest.aggregate_hash)),
            "{}",
            describe(&out)
        );
        (out_path, manifest)
    }

    pub fn html_only(&self, uri: &str) -> String {
        let out = run(cli().args(["hash", uri, "--html-only"]));
        assert_eq!(out.status.code(), Some(0), "{}", describe(&out));
        let text = stdout(&out);
        text.lines()
            .find_map(|l| l.strip_prefix("html-only: "))
            .unwrap_or_else(|| panic!("{}", describe(&out)))
            .to_string()
    }

    pub fn compare(&self, a: &Path, b: &Path) -> Output {
        run(cli().arg("compare").arg(a).arg(b))
    }
}

/// Record hash for a target URI-R.
pub fn record_hash(m: &FixityManifest, target: &str) -> Option<String> {
    m.records
        .iter()
        .find(|r| r.target.as_str() == target)
        .map(|r| r.content_hash.clone())
}
