//! `dqm`: bounds, networks, oracle checks, scans and function estimation
//! from JSON configs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dqm_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "dqm",
    version,
    about = "Distributed quadrature-phase sensing calculator"
)]
pub struct Cli {
    /// Worker threads for scans (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Omit the `generated_at` field so outputs are byte-identical.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Overrides every Fock cutoff in the config.
    #[arg(long)]
    pub cutoff: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sensitivity bounds for one input and weight vector.
    Bound(Common),
    /// Optimal network matrix and its beamsplitter mesh.
    Network(Common),
    /// Oracle and saturation checks with pass/fail per tolerance.
    Verify(Common),
    /// Scaling-exponent scans and sensitivity curves as CSV.
    Scan(Common),
    /// Two-step function estimation bound.
    Funcest(Common),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidState(_)
            | Error::PairingViolation { .. }
            | Error::ZeroWeights
            | Error::InvalidWeights(_)
            | Error::DimensionMismatch { .. }
            | Error::IndexOutOfRange { .. }
            | Error::InvalidArgument(_)
            | Error::InvalidPlan(_)
            | Error::ZeroGradient
            | Error::MeshParse { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o: {e}"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DQM_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        log::warn!("thread pool: {e}");
    }
    match commands::run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err((e, partial)) => {
            if let Some(p) = partial {
                print!("{p}");
            }
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
