//! `spinlock`: synthesize phase noise, compute sideband couplings, simulate
//! locking scans and reconstruct noise spectra from a TOML config.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;
use output::Staged;

#[derive(Parser)]
#[command(
    name = "spinlock",
    version,
    about = "Spin-locking noise spectroscopy simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for ensemble averages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Noise trajectories and their estimated spectrum.
    Synthesize,
    /// Sideband coupling table, coupling-vs-n̄ curve and optimum.
    Coupling,
    /// Simulated locking scan.
    Scan,
    /// Decay fits and reconstructed spectrum from a scan.
    Spectrum,
    /// Synthetic data bundles for the standard figures.
    DemoFigures,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Synthesize => "synthesize",
            Command::Coupling => "coupling",
            Command::Scan => "scan",
            Command::Spectrum => "spectrum",
            Command::DemoFigures => "demo-figures",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut out = Staged::new();
    match cli.command {
        Command::Synthesize => commands::synthesize(&cfg, &mut out)?,
        Command::Coupling => commands::coupling(&cfg, &mut out)?,
        Command::Scan => commands::scan(&cfg, &mut out)?,
        Command::Spectrum => commands::spectrum(&cfg, &mut out)?,
        Command::DemoFigures => commands::demo_figures(&cfg, &mut out)?,
    }
    let written = out.commit(&cli.out, cli.command.name(), &cfg)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
