use thiserror::Error;

/// Failures from parsing Memento protocol artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("not a memento URI: {0}")]
    NotAMemento(String),
    #[error("not an absolute http(s) URI: {0}")]
    InvalidOriginal(String),
    #[error("malformed link-format document: {0}")]
    MalformedLinkFormat(String),
    #[error("malformed Link header: {0}")]
    MalformedLinkHeader(String),
    #[error("malformed HTTP datetime: {0:?}")]
    MalformedDatetime(String),
    #[error("snapshots describe different original resources: {0} vs {1}")]
    OriginalMismatch(String, String),
    #[error("TimeMap does not name its original resource")]
    MissingOriginal,
}

/// Failures from loading configuration, profile and policy files.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Syntax {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid hash profile: {0}")]
    Profile(String),
    #[error("invalid fetch policy: {0}")]
    Policy(String),
    #[error("could not read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("could not parse {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Failures from manifest construction and comparison.
#[derive(Debug, Error)]
pub enum FixityError {
    #[error("no hashable resources: {0}")]
    EmptyManifest(String),
    #[error("manifests use different hash profiles")]
    ProfileMismatch,
    #[error("manifests describe different roots: {0} vs {1}")]
    RootMismatch(String, String),
    #[error(transparent)]
    Fetch(#[from] crate::fetch::FetchError),
    #[error("manifest serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

/// Failures from the timestamping ledger.
#[derive(Debug, Error)]
pub enum AnchorError {
    #[error("malformed hash digest: {0:?}")]
    MalformedHash(String),
    #[error("ledger unavailable: {0}")]
    LedgerUnavailable(String),
    #[error("ledger entry {line} is corrupt: {message}")]
    CorruptLedger { line: usize, message: String },
    #[error("no timestamp recorded for {0}")]
    NotFound(String),
    #[error("cannot batch an empty list of hashes")]
    EmptyBatch,
}
