mod anchor;
mod exit;
mod hash;
mod timemap;

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use memento_fixity::fixity::{compare_manifests, Verdict};
use memento_fixity::FixityManifest;

use exit::Exit;

/// Repeatable fixity for composite web archive mementos.
#[derive(Parser)]
#[command(name = "memento-fixity", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hash a composite memento and write its manifest.
    Hash(hash::HashArgs),
    /// Compare two manifests of the same memento.
    Compare(CompareArgs),
    /// Record a manifest aggregate (or a raw digest) in the ledger.
    Stamp(anchor::StampArgs),
    /// Stamp several digests under one Merkle root.
    Batch(anchor::BatchArgs),
    /// Look up a digest, manifest or receipt in the ledger.
    Verify(anchor::VerifyArgs),
    /// Check the ledger's checksum chain.
    Audit(anchor::AuditArgs),
    /// Snapshot a TimeMap, or diff it against an earlier snapshot.
    Timemap(timemap::TimemapArgs),
    /// Serve a fixture scenario as a replay archive.
    ServeFixture(ServeArgs),
    /// Check a scenario file without serving it.
    ValidateScenario {
        scenario: PathBuf,
    },
}

#[derive(Args)]
struct CompareArgs {
    /// Earlier manifest.
    before: PathBuf,
    /// Later manifest.
    after: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    };
    std::process::exit(code);
}

fn run(command: Command) -> Result<i32, Exit> {
    match command {
        Command::Hash(args) => hash::run(args),
        Command::Compare(args) => compare(args),
        Command::Stamp(args) => anchor::stamp(args),
        Command::Batch(args) => anchor::batch(args),
        Command::Verify(args) => anchor::verify(args),
        Command::Audit(args) => anchor::audit(args),
        Command::Timemap(args) => timemap::run(args),
        Command::ServeFixture(args) => serve(args),
        Command::ValidateScenario { scenario } => {
            let s = memento_fixity_sim::validate_scenario(&scenario).map_err(Exit::usage)?;
            println!("{}: ok ({} resources, events: {})", s.name(), s.resources.len(), s.events().join(", "));
            Ok(exit::OK)
        }
    }
}

pub(crate) fn load_manifest(path: &std::path::Path) -> Result<FixityManifest, Exit> {
    FixityManifest::load(path).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))
}

fn compare(args: CompareArgs) -> Result<i32, Exit> {
    let a = load_manifest(&args.before)?;
    let b = load_manifest(&args.after)?;
    let report = compare_manifests(&a, &b).map_err(Exit::usage)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(Exit::failure)?);
    } else {
        println!("verdict: {:?}", report.verdict);
        println!("aggregate before: {}", report.aggregate_before);
        println!("aggregate after:  {}", report.aggregate_after);
        for c in &report.changed {
            println!("changed  {}  {} -> {}", c.target, c.before, c.after);
        }
        for r in &report.added {
            println!("added    {}  {}", r.target, r.content_hash);
        }
        for r in &report.removed {
            println!("removed  {}  {}", r.target, r.content_hash);
        }
        for r in &report.inconclusive {
            println!("unsure   {}  {} -> {}", r.uri, r.before, r.after);
        }
    }
    Ok(match report.verdict {
        Verdict::Match => exit::OK,
        Verdict::Tampered => exit::TAMPERED,
        Verdict::Inconclusive => exit::INCONCLUSIVE,
    })
}

fn serve(args: ServeArgs) -> Result<i32, Exit> {
    let scenario = memento_fixity_sim::validate_scenario(&args.scenario).map_err(Exit::usage)?;
    let server = memento_fixity_sim::serve(scenario, SocketAddr::new(args.host, args.port))
        .map_err(|e| Exit::failure(format!("cannot bind {}:{}: {e}", args.host, args.port)))?;
    println!("serving {} at {}", server.scenario().name(), server.base_url());
    println!("root: {}", server.root_uri());
    println!("events: {}", server.scenario().events().join(", "));
    server.wait();
    Ok(exit::OK)
}
