//! `floquet`: estimators and diagnostics for the principal Floquet
//! structure of positive random matrix cocycles.
//!
//! Exit codes: 0 success, 2 configuration error, 3 an assumption check
//! failed, 4 numerical abort.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use floquet_core::CoreError;

use crate::config::RunConfig;
use crate::report::{write_record, RunRecord, SCHEMA_VERSION};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FLOQUET_OUT_DIR";

/// A terminal failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: String) -> Self {
        Self { code: 2, message }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::InvalidConfig(_) | CoreError::DimensionMismatch { .. } => 2,
            CoreError::FocusingViolation { .. }
            | CoreError::DominationViolated { .. }
            | CoreError::DegeneratePairing { .. }
            | CoreError::NonPositiveEntry { .. } => 3,
            _ => 4,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "floquet",
    version,
    about = "Principal Floquet vectors, Lyapunov exponents and exponential \
             separation for positive random matrix cocycles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to $FLOQUET_OUT_DIR, then ./floquet-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replicate runs; defaults to the full pool.
    #[arg(long)]
    workers: Option<usize>,
    /// Override the configured horizon.
    #[arg(long)]
    horizon: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the top Lyapunov exponent.
    Estimate(CommonArgs),
    /// Estimate the second exponent and the exponential separation.
    Separation(CommonArgs),
    /// Run the standing-assumption diagnostics.
    Verify(CommonArgs),
    /// Coupled monotonicity comparison against a dominating model.
    Compare(CommonArgs),
    /// Reconstruct the entire positive orbit around an anchor.
    Orbit(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Separation(_) => "separation",
            Command::Verify(_) => "verify",
            Command::Compare(_) => "compare",
            Command::Orbit(_) => "orbit",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Estimate(a)
            | Command::Separation(a)
            | Command::Verify(a)
            | Command::Compare(a)
            | Command::Orbit(a) => a,
        }
    }
}

fn resolve_out(args: &CommonArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("floquet-out"))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let args = cli.command.args();
    let cfg = RunConfig::load(&args.config)?;
    let est = cfg.estimator(args.workers, args.horizon);
    let out = resolve_out(args);
    std::fs::create_dir_all(&out).map_err(|e| Failure {
        code: 4,
        message: format!("cannot create output directory {}: {e}", out.display()),
    })?;

    let start = Instant::now();
    let (results, code) = match &cli.command {
        Command::Estimate(_) => commands::cmd_estimate(&cfg, &est, &out)?,
        Command::Separation(_) => commands::cmd_separation(&cfg, &est, &out)?,
        Command::Verify(_) => commands::cmd_verify(&cfg, &est, &out)?,
        Command::Compare(_) => commands::cmd_compare(&cfg, &est, &out)?,
        Command::Orbit(_) => commands::cmd_orbit(&cfg, &est, &out)?,
    };

    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        command: cli.command.name().to_string(),
        config: cfg,
        horizon: est.horizon,
        workers: est.workers,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        results,
    };
    let path = write_record(&out, &record)?;
    println!("wrote {}", path.display());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
