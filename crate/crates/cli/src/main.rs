//! `moire-spectra`: spectra of incommensurate bilayer Schrödinger operators
//! from a single TOML configuration.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Context};
use config::Loaded;

#[derive(Parser)]
#[command(name = "moire-spectra", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Bands over the k-grid at fixed regularization.
    Bands,
    /// Regularization ladder and extrapolation at one fiber.
    Continuation,
    /// Extrapolated spectrum over the k-grid.
    Spectrum,
    /// Diagonal restriction of one Bloch solution and its residuals.
    Residual,
    /// Finite-difference spectrum on a truncated domain.
    Reference,
    /// Distance between the `spectrum` and `reference` artifacts.
    Compare {
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Validate the configuration and test the lattices for commensurability.
    Check,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let Some(path) = cli.config.as_deref() else {
        return Err(CliError::Config(anyhow::anyhow!("--config is required")));
    };
    let loaded = Loaded::from_path(path).map_err(CliError::Config)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config(anyhow::anyhow!("--workers must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Solver(e.into()))?;
    }
    let ctx = Context { loaded: &loaded, out: cli.out.as_deref() };
    match cli.command {
        Command::Bands => commands::bands(&ctx),
        Command::Continuation => commands::continuation(&ctx),
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Residual => commands::residual(&ctx),
        Command::Reference => commands::reference(&ctx),
        Command::Compare { spectrum, reference } => commands::compare(&ctx, spectrum, reference),
        Command::Check => commands::check(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("moire-spectra: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
