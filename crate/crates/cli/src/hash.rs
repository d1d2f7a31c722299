use std::path::PathBuf;

use clap::Args;
use memento_fixity::extract::ExpandOptions;
use memento_fixity::fixity::{hash_composite_memento, hash_html_only, ExclusionReason, HashAlgorithm};
use memento_fixity::{ArchiveConfig, FetchPolicy, Fetcher, FixityError, HashProfile, MementoUri};

use crate::exit::{self, Exit};

#[derive(Args)]
pub struct HashArgs {
    /// URI-M of the root page.
    uri_m: String,
    /// Hash profile (JSON).
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Fetch policy (JSON).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Archive configuration: replay prefixes, deny-list, banner selectors.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Hash only the replayed HTML, like the naive method. Not a fixity value.
    #[arg(long)]
    html_only: bool,
    /// Hash bodies only, no status line or headers.
    #[arg(long)]
    body_only: bool,
    #[arg(long, value_parser = ["sha256", "md5"])]
    algorithm: Option<String>,
    #[arg(long)]
    no_cache_bypass: bool,
    #[arg(long)]
    no_stability_probe: bool,
    #[arg(long)]
    stability_delay_ms: Option<u64>,
    #[arg(long)]
    max_depth: Option<u32>,
    /// Print the manifest to standard output.
    #[arg(long)]
    json: bool,
}

pub fn run(args: HashArgs) -> Result<i32, Exit> {
    let mut config = match &args.config {
        Some(path) => ArchiveConfig::load(path)?,
        None => ArchiveConfig::default(),
    };
    let root = match MementoUri::parse(&args.uri_m, &config.prefixes) {
        Ok(m) => m,
        Err(_) => {
            // trust the archive the root itself comes from
            let m = MementoUri::infer(&args.uri_m).map_err(Exit::usage)?;
            config.prefixes.push(m.archive_prefix().to_string());
            m
        }
    };

    let mut profile = match &args.profile {
        Some(path) => HashProfile::load(path)?,
        None => HashProfile::default(),
    };
    if args.body_only {
        profile.included_headers.clear();
    }
    match args.algorithm.as_deref() {
        Some("md5") => profile.algorithm = HashAlgorithm::Md5,
        Some("sha256") => profile.algorithm = HashAlgorithm::Sha256,
        _ => {}
    }
    let profile = profile.validated()?;

    let mut policy = match &args.policy {
        Some(path) => FetchPolicy::load(path)?,
        None => FetchPolicy::default(),
    };
    if args.no_cache_bypass {
        policy.cache_bypass = false;
    }
    if args.no_stability_probe {
        policy.stability_probe = false;
    }
    if let Some(ms) = args.stability_delay_ms {
        policy.stability_delay_ms = ms;
    }
    policy.validate()?;
    let fetcher = Fetcher::new(policy).map_err(Exit::failure)?;

    if args.html_only || profile.html_only {
        eprintln!("WARNING: --html-only hashes the replayed HTML as served. It ignores embedded");
        eprintln!("WARNING: resources and includes archive banners; it is not a fixity value.");
        let digest = hash_html_only(&root, &fetcher, &profile).map_err(Exit::failure)?;
        println!("html-only: {digest}");
        return Ok(exit::OK);
    }

    let mut options = ExpandOptions::default();
    if let Some(d) = args.max_depth {
        options.max_depth = d;
    }
    let manifest = hash_composite_memento(&root, &fetcher, &profile, &config, &options).map_err(|e| match e {
        FixityError::EmptyManifest(_) | FixityError::Fetch(_) => Exit::failure(e),
        other => Exit::failure(other),
    })?;
    let text = manifest.to_json().map_err(Exit::failure)?;
    if let Some(out) = &args.out {
        std::fs::write(out, &text).map_err(|e| Exit::failure(format!("{}: {e}", out.display())))?;
    }
    if args.json {
        print!("{text}");
    } else {
        println!("root: {}", manifest.root);
        println!("records: {}", manifest.records.len());
        for reason in [
            ExclusionReason::ArchiveSpecific,
            ExclusionReason::LiveWeb,
            ExclusionReason::Dynamic,
            ExclusionReason::CacheHit,
            ExclusionReason::FetchError,
        ] {
            let n = manifest.excluded.iter().filter(|e| e.reason == reason).count();
            if n > 0 {
                println!("excluded {}: {n}", reason.label());
            }
        }
        println!("aggregate: {}", manifest.aggregate_hash);
    }
    Ok(exit::OK)
}
