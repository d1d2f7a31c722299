use std::path::PathBuf;

use chrono::Utc;
use clap::Args;
use memento_fixity::protocol::{diff_timemaps, parse_link_format};
use memento_fixity::{ArchiveConfig, FetchPolicy, Fetcher, TimeMapSnapshot};

use crate::exit::{self, Exit};

#[derive(Args)]
pub struct TimemapArgs {
    /// URI-T of the TimeMap.
    uri_t: String,
    /// Write the snapshot here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Earlier snapshot to compare against.
    #[arg(long)]
    diff: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

pub fn run(args: TimemapArgs) -> Result<i32, Exit> {
    let config = match &args.config {
        Some(path) => ArchiveConfig::load(path)?,
        None => ArchiveConfig::default(),
    };
    let mut policy = match &args.policy {
        Some(path) => FetchPolicy::load(path)?,
        None => FetchPolicy::default(),
    };
    policy.stability_probe = false;
    let prior: Option<TimeMapSnapshot> = match &args.diff {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };

    let fetcher = Fetcher::new(policy).map_err(Exit::failure)?;
    let observed_at = Utc::now();
    let fetched = fetcher.fetch_resource(&args.uri_t).map_err(Exit::failure)?;
    let body = String::from_utf8_lossy(&fetched.body);
    let snapshot = parse_link_format(&body, &args.uri_t, &config.prefixes, observed_at).map_err(Exit::failure)?;
    let text = serde_json::to_string_pretty(&snapshot).map_err(Exit::failure)? + "\n";
    if let Some(out) = &args.out {
        std::fs::write(out, &text).map_err(|e| Exit::failure(format!("{}: {e}", out.display())))?;
    }

    let Some(prior) = prior else {
        if args.json {
            print!("{text}");
        } else {
            println!("original: {}", snapshot.original);
            println!("mementos: {}", snapshot.entries.len());
            if snapshot.dropped_entries > 0 {
                println!("dropped: {}", snapshot.dropped_entries);
            }
        }
        return Ok(exit::OK);
    };
    let delta = diff_timemaps(&prior, &snapshot).map_err(Exit::usage)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&delta).map_err(Exit::failure)?);
    } else {
        for c in &delta.added {
            println!("added    {}  {}", c.datetime.to_rfc3339(), c.memento);
        }
        for c in &delta.removed {
            println!("removed  {}  {}", c.datetime.to_rfc3339(), c.memento);
        }
        println!("unchanged: {}", delta.unchanged_count);
    }
    Ok(if delta.is_empty() { exit::OK } else { exit::INCONCLUSIVE })
}
