use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::CliError;
use config::RunConfig;

/// Asian options under regime-switching geometric Brownian motion.
#[derive(Parser)]
#[command(name = "asian-pricer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (`key = value` per line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the CSV records.
    #[arg(long, global = true, default_value = "reports")]
    out: PathBuf,
    /// Overrides the configured Monte Carlo path count.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Overrides the stopping tolerance of the iteration.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fixed-point price with iteration count, rho and the a-posteriori bound.
    Price,
    /// Monte Carlo price with its standard error.
    Oracle,
    /// Fixed-point price against the Monte Carlo oracle.
    Compare,
    /// Normalisation, exponential-moment and chi-square checks of the joint density.
    DensityCheck,
    /// Per-iteration increments and contraction ratios.
    ConvergeReport,
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let path = cli.config.clone().ok_or_else(|| config::ConfigError::Io {
        path: "<none>".into(),
        message: "--config is required".into(),
    })?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = cli.paths {
        cfg.paths = paths;
    }
    if let Some(eps) = cli.epsilon {
        cfg.engine.epsilon = eps;
        cfg.engine
            .validate()
            .map_err(|e| CliError::Config(config::ConfigError::Spec(e)))?;
    }
    let report = match cli.command {
        Command::Price => commands::price(&cfg, &cli.out)?,
        Command::Oracle => commands::oracle(&cfg, &cli.out)?,
        Command::Compare => commands::compare(&cfg, &cli.out)?,
        Command::DensityCheck => commands::density_check(&cfg, &cli.out)?,
        Command::ConvergeReport => commands::converge_report(&cfg, &cli.out)?,
    };
    report.print();
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
