//! Batch driver: JSON experiment configs in, CSV / JSON / binary artifacts
//! out. Each subcommand maps to one [`Mode`] of [`run_experiment`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod export;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{load_config, parse_config, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use run::{run_experiment, Mode};

#[derive(Debug, Parser)]
#[command(name = "echolab", version, about = "Echo cascades and Landau damping experiments")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; takes precedence over `output_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads for the parallel stages.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Accuracy target of the contour kernel; overrides `tol`.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Penrose margin of the equilibrium.
    Penrose,
    /// Resolvent kernels G_k(t) with envelope bounds.
    Kernel,
    /// Echo-wave cascade layers and the synthesized field.
    Cascade,
    /// Direct spectral solver.
    Direct,
    /// Cascade against the direct solver on identical data.
    Compare,
    /// Echo detection, decay fit and layer bounds.
    Echoes,
    /// Weighted layer bounds only.
    VerifyBounds,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Self {
        match c {
            Command::Penrose => Mode::Penrose,
            Command::Kernel => Mode::Kernel,
            Command::Cascade => Mode::Cascade,
            Command::Direct => Mode::Direct,
            Command::Compare => Mode::Compare,
            Command::Echoes => Mode::Echoes,
            Command::VerifyBounds => Mode::VerifyBounds,
        }
    }
}

/// Loads the config, applies the global flags and runs the subcommand.
pub fn execute(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
        cfg.validate()?;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    run_experiment(&cfg, cli.command.into(), &dir)
}
