//! Repeatable fixity for composite web archive mementos.
//!
//! The pipeline fetches a memento and its embedded resources, classifies each
//! one as archived, archive-specific or live-web, hashes what belongs to the
//! capture, and aggregates the per-resource digests into one hash that can be
//! recorded in a timestamping ledger and verified later.

pub mod anchor;
pub mod config;
pub mod error;
pub mod extract;
pub mod fetch;
pub mod fixity;
pub mod protocol;

pub use config::ArchiveConfig;
pub use error::{AnchorError, ConfigError, FixityError, ProtocolError};
pub use fetch::{FetchError, FetchPolicy, FetchResult, Fetcher, PageCache, Stability};

pub use anchor::{AnchorReceipt, Ledger, LedgerEntry};
pub use fixity::{FixityManifest, HashProfile, ResourceRecord, VerificationReport};
pub use protocol::{MementoUri, Modifier, OriginalUri, TimeMapSnapshot};
