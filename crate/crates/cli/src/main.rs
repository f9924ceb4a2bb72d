//! `interferospec`: scenario runner for interferometric phase-noise and
//! TF-QKD simulations.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 runtime or
//! numerical error (the failing stage is named on stderr).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod amzi;
mod config;
mod error;
mod output;
mod psd;
mod tfqkd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use interferospec::io::Stamp;

use crate::config::ScenarioConfig;
use crate::error::{CliError, CliResult};
use crate::output::{resolve_dir, sha256, Artifacts, OUT_ENV};

#[derive(Debug, Parser)]
#[command(name = "interferospec", version, about)]
struct Cli {
    /// Output directory; falls back to $INTERFEROSPEC_OUT, then the config's output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parallel AMZIs: synthesis, interference, detection, spectra, stitching.
    Amzi(ScenarioArgs),
    /// Single-photon-level drift acquisition and 0/π-keyed QBER.
    Tfqkd(ScenarioArgs),
    /// Spectrum of an existing trace file.
    Psd(psd::PsdArgs),
}

#[derive(Debug, clap::Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &ScenarioArgs) -> CliResult<(ScenarioConfig, Vec<u8>)> {
    let bytes = std::fs::read(&args.config)
        .map_err(|e| CliError::input(format!("{}: {e}", args.config.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::input(format!("{}: not UTF-8: {e}", args.config.display())))?;
    let cfg = config::parse(text, &args.config.display().to_string())?;
    Ok((cfg, bytes))
}

fn out_dir(flag: Option<PathBuf>, cfg: Option<&ScenarioConfig>) -> CliResult<PathBuf> {
    resolve_dir(flag, cfg.and_then(|c| c.output_dir.as_deref())).ok_or_else(|| {
        CliError::input(format!("no output directory: pass --out, set {OUT_ENV} or output_dir"))
    })
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::input("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::input(format!("cannot start {j} workers: {e}")))?;
    }
    match cli.command {
        Command::Amzi(args) => {
            let (cfg, bytes) = load(&args)?;
            let seed = cfg.effective_seed(args.seed)?;
            let plan = cfg.amzi()?;
            let dir = out_dir(cli.out, Some(&cfg))?;
            let art = Artifacts::new(dir, Stamp { config_sha256: sha256(&[&bytes]), seed: Some(seed) });
            amzi::run(&cfg, &plan, seed, &art)
        }
        Command::Tfqkd(args) => {
            let (cfg, bytes) = load(&args)?;
            let seed = cfg.effective_seed(args.seed)?;
            let t = cfg.tfqkd()?;
            let dir = out_dir(cli.out, Some(&cfg))?;
            let art = Artifacts::new(dir, Stamp { config_sha256: sha256(&[&bytes]), seed: Some(seed) });
            tfqkd::run(t, seed, &art)
        }
        Command::Psd(args) => {
            let dir = out_dir(cli.out, None)?;
            psd::run(&args, dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
