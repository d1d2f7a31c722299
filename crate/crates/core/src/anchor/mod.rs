//! Simulated trusted timestamping: ledger addresses, an append-only local
//! log and Merkle batching.
//!
//! The ledger stands in for a public blockchain. It offers the same
//! interface and verification algebra but none of the decentralization.

mod base58;
mod ledger;
mod merkle;

use chrono::{DateTime, Utc};
use ripemd::Ripemd160;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use base58::{encode as base58_encode, encode_check as base58check_encode};
pub use ledger::{chain_checksum, AuditReport, Ledger, LedgerEntry, LEDGER_PATH_ENV};
pub use merkle::{merkle_tree, verify_merkle_proof, ProofStep, Side};

use crate::error::AnchorError;

/// Decodes a lowercase hex SHA-256 or MD5 digest to raw bytes.
pub(crate) fn decode_hash(hash: &str) -> Result<Vec<u8>, AnchorError> {
    let well_formed = matches!(hash.len(), 32 | 64)
        && hash.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
    if !well_formed {
        return Err(AnchorError::MalformedHash(hash.to_string()));
    }
    hex::decode(hash).map_err(|_| AnchorError::MalformedHash(hash.to_string()))
}

/// Pay-to-pubkey-hash style address of a digest:
/// `Base58Check(0x00 ‖ RIPEMD-160(SHA-256(raw digest bytes)))`.
pub fn derive_address(hash: &str) -> Result<String, AnchorError> {
    let raw = decode_hash(hash)?;
    let mut payload = vec![0x00];
    payload.extend_from_slice(&Ripemd160::digest(Sha256::digest(&raw)));
    Ok(base58check_encode(&payload))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorReceipt {
    pub hash: String,
    pub address: String,
    pub sequence: u64,
    pub recorded_at: DateTime<Utc>,
    /// Root recorded in the ledger when `hash` was stamped as part of a batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_root: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merkle_proof: Option<Vec<ProofStep>>,
}

fn receipt(entry: &LedgerEntry) -> AnchorReceipt {
    AnchorReceipt {
        hash: entry.hash.clone(),
        address: entry.address.clone(),
        sequence: entry.sequence,
        recorded_at: entry.recorded_at().unwrap_or_default(),
        batch_root: None,
        merkle_proof: None,
    }
}

pub fn stamp(hash: &str, ledger: &Ledger) -> Result<AnchorReceipt, AnchorError> {
    Ok(receipt(&ledger.append(hash, None)?))
}

/// All receipts whose address derives from `hash`, in sequence order.
pub fn verify_timestamp(hash: &str, ledger: &Ledger) -> Result<Vec<AnchorReceipt>, AnchorError> {
    let address = derive_address(hash)?;
    let found: Vec<_> = ledger.entries_for_address(&address)?.iter().map(receipt).collect();
    if found.is_empty() {
        return Err(AnchorError::NotFound(hash.to_string()));
    }
    Ok(found)
}

/// Stamps the Merkle root of `hashes` (leaves in the given order) and
/// returns the root plus one receipt per hash carrying its inclusion proof.
pub fn merkle_batch(hashes: &[String], ledger: &Ledger) -> Result<(String, Vec<AnchorReceipt>), AnchorError> {
    let (root, proofs) = merkle_tree(hashes)?;
    let entry = ledger.append(&root, Some(&root))?;
    let receipts = hashes
        .iter()
        .zip(proofs)
        .map(|(hash, proof)| AnchorReceipt {
            hash: hash.clone(),
            address: entry.address.clone(),
            sequence: entry.sequence,
            recorded_at: entry.recorded_at().unwrap_or_default(),
            batch_root: Some(root.clone()),
            merkle_proof: Some(proof),
        })
        .collect();
    Ok((root, receipts))
}

/// Checks a receipt against the ledger: a batched receipt must fold to its
/// root and the root must be recorded; a plain one must be recorded itself.
pub fn verify_receipt(receipt: &AnchorReceipt, ledger: &Ledger) -> Result<bool, AnchorError> {
    let recorded = match (&receipt.batch_root, &receipt.merkle_proof) {
        (Some(root), Some(proof)) => {
            if !verify_merkle_proof(&receipt.hash, proof, root) {
                return Ok(false);
            }
            root.clone()
        }
        (None, None) => receipt.hash.clone(),
        _ => return Ok(false),
    };
    match verify_timestamp(&recorded, ledger) {
        Ok(found) => Ok(found.iter().any(|r| r.sequence == receipt.sequence)),
        Err(AnchorError::NotFound(_)) => Ok(false),
        Err(e) => Err(e),
    }
}
