//! Batch front end: candidate traces, optimization runs, noise sweeps, the quantum
//! benchmark and the oracle suite.

pub mod commands;
pub mod config;
pub mod oracle;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use darkpot::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;
pub const EXIT_INSTABILITY: i32 = 4;
pub const EXIT_CONFIG: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible candidate: {0}")]
    Infeasible(String),
    #[error("no feasible candidate")]
    Empty,
    #[error("numerical instability: {0}")]
    Instability(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Empty => EXIT_EMPTY,
            CliError::Instability(_) => EXIT_INSTABILITY,
            CliError::Other(_) => EXIT_FAILURE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(inner) => CliError::Config(inner),
            Error::Domain(_) => CliError::Config(msg),
            Error::NoFeasibleCandidate => CliError::Empty,
            Error::DegenerateEquilibrium(_)
            | Error::UnboundedOrbit(_)
            | Error::DegenerateOrbit(_)
            | Error::NotClosed => CliError::Infeasible(msg),
            Error::BlowUp(_)
            | Error::StepSizeUnderflow(_)
            | Error::MaxSteps(_)
            | Error::IntegratorFailure(_)
            | Error::UndersampledAngle { .. }
            | Error::Instability(_) => CliError::Instability(msg),
            Error::GridMismatch(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => CliError::Other(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "darkpot", version, about = "Static quartic potentials for coherence and non-Gaussianity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration; every key has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set noise.s1=1e-7`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Trajectory, Gaussian and cubicity traces for the configured candidate.
    Trace,
    /// Multi-start search over the quartic family.
    Optimize,
    /// One optimization per noise value along `sweep.axis`.
    Sweep,
    /// Density-matrix benchmark at desk scale.
    Qsim,
    /// Closed-form checks of every solver.
    Oracle,
}

/// Caps the global worker pool at `DARKPOT_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("DARKPOT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second call finds the pool already built, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    init_threads();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("darkpot: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let mut cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    match cli.command {
        Command::Trace => commands::cmd_trace(&cfg),
        Command::Optimize => commands::cmd_optimize(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Qsim => commands::cmd_qsim(&cfg),
        Command::Oracle => commands::cmd_oracle(&cfg),
    }
}
