use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::derive_address;
use crate::error::AnchorError;

pub const LEDGER_PATH_ENV: &str = "LEDGER_PATH";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub sequence: u64,
    pub address: String,
    pub hash: String,
    pub recorded_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_root: Option<String>,
    pub checksum: String,
}

/// The entry as covered by its checksum: every field except the checksum,
/// serialized compactly in declaration order.
#[derive(Serialize)]
struct EntryBody<'a> {
    sequence: u64,
    address: &'a str,
    hash: &'a str,
    recorded_at: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_root: Option<&'a str>,
}

impl LedgerEntry {
    pub fn body_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&EntryBody {
            sequence: self.sequence,
            address: &self.address,
            hash: &self.hash,
            recorded_at: &self.recorded_at,
            batch_root: self.batch_root.as_deref(),
        })
        .expect("entry body serializes")
    }

    pub fn recorded_at(&self) -> Option<DateTime<Utc>> {
        DateTime::parse_from_rfc3339(&self.recorded_at)
            .ok()
            .map(|dt| dt.with_timezone(&Utc))
    }
}

/// `SHA-256(previous checksum bytes ‖ entry body)`, hex. The first entry
/// chains from 32 zero bytes.
pub fn chain_checksum(previous: &[u8; 32], body: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(previous);
    h.update(body);
    h.finalize().into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub entries: u64,
}

#[derive(Debug, Default)]
struct Tail {
    /// File length the cached state was computed at.
    len: u64,
    sequence: u64,
    checksum: [u8; 32],
}

/// An append-only, hash-chained log of stamped digests in a
/// newline-delimited JSON file.
///
/// Appends go through one writer lock per `Ledger`; readers parse only
/// complete lines and so always see a prefix of the log.
#[derive(Debug)]
pub struct Ledger {
    path: PathBuf,
    tail: Mutex<Option<Tail>>,
}

impl Ledger {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, AnchorError> {
        let path = path.into();
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| unavailable(&path, e))?;
        Ok(Self {
            path,
            tail: Mutex::new(None),
        })
    }

    /// Opens the ledger named by `LEDGER_PATH`.
    pub fn from_env() -> Result<Self, AnchorError> {
        let path = std::env::var_os(LEDGER_PATH_ENV)
            .ok_or_else(|| AnchorError::LedgerUnavailable(format!("{LEDGER_PATH_ENV} is not set")))?;
        Self::open(PathBuf::from(path))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All complete entries in file order. Does not check the chain; see
    /// [`Ledger::audit`].
    pub fn entries(&self) -> Result<Vec<LedgerEntry>, AnchorError> {
        let file = File::open(&self.path).map_err(|e| unavailable(&self.path, e))?;
        let mut reader = BufReader::new(file);
        let mut entries = Vec::new();
        let mut line = String::new();
        let mut number = 0;
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(|e| unavailable(&self.path, e))?;
            // a line without its newline is an append still in flight
            if n == 0 || !line.ends_with('\n') {
                break;
            }
            number += 1;
            if line.trim().is_empty() {
                return Err(corrupt(number, "blank line"));
            }
            let entry: LedgerEntry = serde_json::from_str(&line).map_err(|e| corrupt(number, e))?;
            entries.push(entry);
        }
        Ok(entries)
    }

    /// Complete entries whose address is `address`, in file order. Only
    /// lines mentioning the address are parsed, so a lookup stays cheap on a
    /// long ledger; damage elsewhere is for [`Ledger::audit`] to report.
    pub fn entries_for_address(&self, address: &str) -> Result<Vec<LedgerEntry>, AnchorError> {
        let text = std::fs::read_to_string(&self.path).map_err(|e| unavailable(&self.path, e))?;
        let complete = text.rfind('\n').map_or("", |i| &text[..=i]);
        let mut found = Vec::new();
        for (i, line) in complete.lines().enumerate() {
            if !line.contains(address) {
                continue;
            }
            let entry: LedgerEntry = serde_json::from_str(line).map_err(|e| corrupt(i + 1, e))?;
            if entry.address == address {
                found.push(entry);
            }
        }
        Ok(found)
    }

    /// Verifies the whole chain: sequences strictly increase, each address
    /// derives from its hash, and each checksum covers its predecessor.
    pub fn audit(&self) -> Result<AuditReport, AnchorError> {
        let entries = self.entries()?;
        let tail = audit_entries(&entries)?;
        Ok(AuditReport { entries: tail.1 })
    }

    /// Appends an entry for `hash`. Duplicate hashes are allowed and get
    /// their own entries.
    pub fn append(&self, hash: &str, batch_root: Option<&str>) -> Result<LedgerEntry, AnchorError> {
        let address = derive_address(hash)?;
        let mut guard = self.tail.lock().unwrap_or_else(|p| p.into_inner());
        let current_len = std::fs::metadata(&self.path)
            .map_err(|e| unavailable(&self.path, e))?
            .len();
        if guard.as_ref().is_none_or(|t| t.len != current_len) {
            let entries = self.entries()?;
            let (checksum, _) = audit_entries(&entries)?;
            *guard = Some(Tail {
                len: current_len,
                sequence: entries.last().map_or(0, |e| e.sequence),
                checksum,
            });
        }
        let tail = guard.as_mut().expect("tail initialized");

        let mut entry = LedgerEntry {
            sequence: tail.sequence + 1,
            address,
            hash: hash.to_string(),
            recorded_at: Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true),
            batch_root: batch_root.map(str::to_string),
            checksum: String::new(),
        };
        let checksum = chain_checksum(&tail.checksum, &entry.body_bytes());
        entry.checksum = hex::encode(checksum);

        let mut line = serde_json::to_vec(&entry).expect("entry serializes");
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| unavailable(&self.path, e))?;
        file.write_all(&line).map_err(|e| unavailable(&self.path, e))?;
        file.flush().map_err(|e| unavailable(&self.path, e))?;

        tail.len = current_len + line.len() as u64;
        tail.sequence = entry.sequence;
        tail.checksum = checksum;
        Ok(entry)
    }
}

/// Returns the final checksum and entry count.
fn audit_entries(entries: &[LedgerEntry]) -> Result<([u8; 32], u64), AnchorError> {
    let mut previous = [0u8; 32];
    let mut last_sequence = 0;
    for (i, entry) in entries.iter().enumerate() {
        let line = i + 1;
        if entry.sequence <= last_sequence {
            return Err(corrupt(line, format!("sequence {} does not increase", entry.sequence)));
        }
        match derive_address(&entry.hash) {
            Ok(a) if a == entry.address => {}
            Ok(_) => return Err(corrupt(line, "address does not derive from hash")),
            Err(e) => return Err(corrupt(line, e)),
        }
        if entry.recorded_at().is_none() {
            return Err(corrupt(line, "recorded_at is not an RFC 3339 datetime"));
        }
        let expected = chain_checksum(&previous, &entry.body_bytes());
        if hex::encode(expected) != entry.checksum {
            return Err(corrupt(line, "checksum chain broken"));
        }
        previous = expected;
        last_sequence = entry.sequence;
    }
    Ok((previous, entries.len() as u64))
}

fn unavailable(path: &Path, e: std::io::Error) -> AnchorError {
    AnchorError::LedgerUnavailable(format!("{}: {e}", path.display()))
}

fn corrupt(line: usize, message: impl ToString) -> AnchorError {
    AnchorError::CorruptLedger {
        line,
        message: message.to_string(),
    }
}
