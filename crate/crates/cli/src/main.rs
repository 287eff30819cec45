use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use config::{Method, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] gsync::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Numerical(_) | CliError::Io { .. } => ExitCode::from(3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RequireArg {
    Esp,
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Debug, Parser)]
#[command(name = "gsync", version, about = "Construct and certify generalized synchronizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults reproduce the Lorenz setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides run.out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized diagnostics (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the driving trajectory and its observations.
    Simulate,
    /// Check invariance and contraction conditions on every region.
    Certify {
        #[arg(long, value_enum)]
        require: Option<RequireArg>,
    },
    /// Compute one synchronization per region.
    Synchronize {
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// ESP, input forgetting and regularity diagnostics on the first region.
    Diagnose,
    /// Plot data for the figures; all four when no figure is given.
    Reproduce {
        #[arg(long, value_enum)]
        figure: Option<Figure>,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.run.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    match &cli.command {
        Command::Certify { require: Some(r) } => {
            cfg.run.require = match r {
                RequireArg::Esp => gsync::contraction::Requirement::Esp,
                RequireArg::Diff => gsync::contraction::Requirement::Diff,
            }
        }
        Command::Synchronize { method: Some(m) } => cfg.run.method = *m,
        _ => {}
    }
    let built = cfg.build()?;
    let out = commands::Output::create(&cfg)?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &built, &out),
        Command::Certify { .. } => commands::certify(&cfg, &built, &out),
        Command::Synchronize { .. } => commands::synchronize(&cfg, &built, &out),
        Command::Diagnose => commands::diagnose(&cfg, &built, &out),
        Command::Reproduce { figure } => commands::reproduce(&cfg, &built, &out, figure),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gsync: {e}");
            e.exit_code()
        }
    }
}
