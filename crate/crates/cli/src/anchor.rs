use std::path::{Path, PathBuf};

use clap::Args;
use memento_fixity::anchor::{merkle_batch, stamp as stamp_hash, verify_receipt, verify_timestamp, LEDGER_PATH_ENV};
use memento_fixity::{AnchorError, AnchorReceipt, Ledger};

use crate::exit::{self, Exit};

#[derive(Args)]
pub struct LedgerArg {
    /// Ledger file; created on first stamp.
    #[arg(long, env = LEDGER_PATH_ENV)]
    ledger: Option<PathBuf>,
}

impl LedgerArg {
    fn open(&self) -> Result<Ledger, Exit> {
        let path = self
            .ledger
            .as_ref()
            .ok_or_else(|| Exit::usage(format!("no ledger: pass --ledger or set {LEDGER_PATH_ENV}")))?;
        Ok(Ledger::open(path)?)
    }
}

#[derive(Args)]
pub struct StampArgs {
    /// Manifest file or hex digest.
    target: String,
    #[command(flatten)]
    ledger: LedgerArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
pub struct BatchArgs {
    /// Manifest files or hex digests, in leaf order.
    #[arg(required = true)]
    targets: Vec<String>,
    #[command(flatten)]
    ledger: LedgerArg,
    /// Write the receipts (with inclusion proofs) here as JSON.
    #[arg(long)]
    receipts: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Hex digest, manifest file, or receipt file.
    target: String,
    #[command(flatten)]
    ledger: LedgerArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
pub struct AuditArgs {
    #[command(flatten)]
    ledger: LedgerArg,
}

/// Resolves a digest argument: a manifest path yields its aggregate, which
/// must agree with its records.
fn digest_of(target: &str) -> Result<String, Exit> {
    let path = Path::new(target);
    if !path.is_file() {
        return Ok(target.to_string());
    }
    let manifest = crate::load_manifest(path)?;
    let recomputed = manifest.recompute_aggregate().map_err(Exit::usage)?;
    if recomputed != manifest.aggregate_hash {
        return Err(Exit {
            code: exit::TAMPERED,
            message: format!(
                "{target}: aggregate_hash {} does not match its records ({recomputed})",
                manifest.aggregate_hash
            ),
        });
    }
    Ok(recomputed)
}

fn print_receipt(r: &AnchorReceipt) {
    println!("hash: {}", r.hash);
    println!("address: {}", r.address);
    println!("sequence: {}", r.sequence);
    println!("recorded_at: {}", r.recorded_at.to_rfc3339_opts(chrono::SecondsFormat::Micros, true));
    if let Some(root) = &r.batch_root {
        println!("batch_root: {root}");
    }
}

pub fn stamp(args: StampArgs) -> Result<i32, Exit> {
    let hash = digest_of(&args.target)?;
    let ledger = args.ledger.open()?;
    let receipt = stamp_hash(&hash, &ledger)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&receipt).map_err(Exit::failure)?);
    } else {
        print_receipt(&receipt);
    }
    Ok(exit::OK)
}

pub fn batch(args: BatchArgs) -> Result<i32, Exit> {
    let hashes = args.targets.iter().map(|t| digest_of(t)).collect::<Result<Vec<_>, _>>()?;
    let ledger = args.ledger.open()?;
    let (root, receipts) = merkle_batch(&hashes, &ledger)?;
    println!("batch_root: {root}");
    println!("sequence: {}", receipts[0].sequence);
    println!("address: {}", receipts[0].address);
    let text = serde_json::to_string_pretty(&receipts).map_err(Exit::failure)?;
    match &args.receipts {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| Exit::failure(format!("{}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    Ok(exit::OK)
}

pub fn verify(args: VerifyArgs) -> Result<i32, Exit> {
    let ledger = args.ledger.open()?;
    let path = Path::new(&args.target);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
        let receipts: Option<Vec<AnchorReceipt>> = serde_json::from_str::<Vec<AnchorReceipt>>(&text)
            .ok()
            .or_else(|| serde_json::from_str::<AnchorReceipt>(&text).ok().map(|r| vec![r]));
        if let Some(receipts) = receipts {
            let mut all = true;
            for r in &receipts {
                let ok = verify_receipt(r, &ledger)?;
                println!("{} {}", if ok { "verified" } else { "NOT VERIFIED" }, r.hash);
                all &= ok;
            }
            return Ok(if all { exit::OK } else { exit::TAMPERED });
        }
    }
    let hash = digest_of(&args.target)?;
    match verify_timestamp(&hash, &ledger) {
        Ok(receipts) => {
            if args.json {
                println!("{}", serde_json::to_string_pretty(&receipts).map_err(Exit::failure)?);
            } else {
                for (i, r) in receipts.iter().enumerate() {
                    if i > 0 {
                        println!();
                    }
                    print_receipt(r);
                }
            }
            Ok(exit::OK)
        }
        Err(AnchorError::NotFound(_)) => {
            println!("not found: {hash}");
            Ok(exit::TAMPERED)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn audit(args: AuditArgs) -> Result<i32, Exit> {
    let ledger = args.ledger.open()?;
    match ledger.audit() {
        Ok(report) => {
            println!("ledger intact: {} entries", report.entries);
            Ok(exit::OK)
        }
        Err(AnchorError::CorruptLedger { line, message }) => {
            println!("ledger corrupt at entry {line}: {message}");
            Ok(exit::TAMPERED)
        }
        Err(e) => Err(e.into()),
    }
}
