use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qdemon::cli::{run_single, run_sweep, write_sweep, write_validation};
use qdemon::config::{schema, RunConfig};
use qdemon::validation::validate;
use qdemon::Error;

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "qdemon", version, about = "Single-qubit Maxwell's demon simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write sweep.csv and manifest.json.
    Sweep(Common),
    /// Check the simulator against the exact oracle and known identities.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Print the JSON report instead of the human-readable one.
        #[arg(long)]
        json: bool,
    },
    /// Summarize one ensemble and print it as JSON; with --out also write
    /// summary.json and manifest.json.
    Single {
        #[command(flatten)]
        common: Common,
        /// Value on the sweep axis instead of the configured point.
        #[arg(long, allow_negative_numbers = true)]
        param: Option<f64>,
    },
    /// Print the JSON schema of the configuration file.
    Schema,
}

fn load(common: &Common) -> qdemon::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> qdemon::Result<u8> {
    match cli.command {
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&schema())?);
            Ok(0)
        }
        Command::Sweep(common) => {
            let cfg = load(&common)?;
            let out = run_sweep(&cfg)?;
            for w in out.warnings() {
                eprintln!("warning: {w}");
            }
            for path in write_sweep(&out, &cfg.output.dir)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(0)
        }
        Command::Single { common, param } => {
            let cfg = load(&common)?;
            let dir = common.out.as_ref().map(|_| cfg.output.dir.as_path());
            let out = run_single(&cfg, param, dir)?;
            for w in &out.result.summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&out.result)?);
            Ok(0)
        }
        Command::Validate { common, json } => {
            let cfg = load(&common)?;
            let report = validate(&cfg)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{report}");
            }
            if common.out.is_some() {
                write_validation(&report, &cfg.output.dir)?;
            }
            Ok(if report.passed { 0 } else { EXIT_INVARIANT })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Json(_) | Error::InvalidInput(_) => EXIT_CONFIG,
                _ => EXIT_INVARIANT,
            })
        }
    }
}
