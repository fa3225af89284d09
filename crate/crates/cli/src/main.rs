//! `irsnoma` command-line runner: one subcommand per experiment, CSV out.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use irsnoma::experiments::{self, load_config, ExperimentConfig, Table};

#[derive(Parser)]
#[command(name = "irsnoma", version, about = "IRS-assisted NOMA VLC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// First-user BER versus transmit SNR per strategy.
    BerVsSnr(RunArgs),
    /// Mean first-user BER versus number of IRS elements.
    BerVsElements(RunArgs),
    /// Best fitness per generation, adaptive-restart versus plain GA.
    Convergence(RunArgs),
    /// Monte Carlo BER of every user against the union bound.
    ValidateBound(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; defaults to the configured path, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, env = "IRSNOMA_JOBS")]
    jobs: Option<usize>,
}

fn run(cli: Cli) -> Result<()> {
    let (args, runner): (RunArgs, fn(&ExperimentConfig) -> irsnoma::Result<Table>) =
        match cli.command {
            Command::BerVsSnr(a) => (a, experiments::run_ber_vs_snr),
            Command::BerVsElements(a) => (a, experiments::run_ber_vs_elements),
            Command::Convergence(a) => (a, experiments::run_convergence),
            Command::ValidateBound(a) => (a, experiments::run_validate_bound),
        };
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config = config.with_seed(seed);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("failed to start worker pool")?;
    let table = pool.install(|| runner(&config))?;
    let csv = table.to_csv()?;
    match args.out.or(config.output_path) {
        Some(path) => std::fs::write(&path, csv)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().lock().write_all(csv.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
