//! `rhawkes`: expectations, simulation, replacement policies, intensity
//! replay and the validation suite for renewal Hawkes processes.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical error,
//! 3 validation failure.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Failure of one command, mapped to a process exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// Process exit code.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io(_) => 1,
            Self::Numeric(_) => 2,
            Self::Validation(_) => 3,
        }
    }
}

impl From<renewal_hawkes::Error> for CliError {
    fn from(e: renewal_hawkes::Error) -> Self {
        use renewal_hawkes::Error as E;
        match e {
            E::Config(_) | E::Domain { .. } | E::Unsupported(_) => Self::Config(e.to_string()),
            _ => Self::Numeric(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rhawkes", version)]
#[command(about = "Renewal Hawkes processes: expectations, simulation, replacement policies")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mean counts and mean intensities on the grid, one CSV per class.
    Expect(ExpectArgs),
    /// Simulated event logs and a Monte-Carlo estimate of the mean count.
    Simulate(SimulateArgs),
    /// Long-run cost rate curves and optimal replacement times.
    Optimize(OptimizeArgs),
    /// Intensity of a given event/renewal history.
    Replay(ReplayArgs),
    /// Runs the acceptance suite and writes a JSON verdict.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Grid,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailArg {
    Survival,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum R3ForcingArg {
    Printed,
    Counted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Auto,
    General,
}

/// Options shared by every command that solves the renewal equations.
#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    /// Weight of the classical mean before the first renewal.
    #[arg(long, value_enum, default_value_t = TailArg::Survival)]
    pub tail: TailArg,
    /// R3 forcing term: as printed, or with the renewal-triggering immigrant counted.
    #[arg(long, value_enum, default_value_t = R3ForcingArg::Printed)]
    pub r3_forcing: R3ForcingArg,
    /// Kernel-table path; `general` skips the exponential-kernel recursions.
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,
    /// Allow the O(n^4) general path above n = 400.
    #[arg(long)]
    pub allow_large_n: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ExpectArgs {
    /// Configuration file.
    pub config: PathBuf,
    /// Classes to solve (default: the configured class).
    #[arg(long, value_delimiter = ',')]
    pub class: Vec<String>,
    #[arg(long, value_enum, default_value_t = MethodArg::Grid)]
    pub method: MethodArg,
    /// Output directory (default: `[run] output`, else the current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub class: Option<String>,
    /// Number of replications; a Monte-Carlo CSV is written from 100 on.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation horizon (default: the grid horizon); a multiple of the grid step.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// `theorem3` (triggering immigrant of an R3 renewal not counted) or `appendixB`.
    #[arg(long, default_value = "theorem3")]
    pub r3_convention: String,
    /// Number of event logs written.
    #[arg(long, default_value_t = 1)]
    pub log_paths: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OptimizeArgs {
    pub config: PathBuf,
    /// 1: minimal repair at every failure; 2: immigrant failures replaced.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub problem: u8,
    #[arg(long, value_delimiter = ',')]
    pub class: Vec<String>,
    /// Problem 2: `exact` (needs E[N_I]) or `bounds`.
    #[arg(long, default_value = "exact")]
    pub mode: String,
    /// Scanned interval `a,b` (default 0.5 to the horizon).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub range: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    pub config: PathBuf,
    /// Event times.
    #[arg(long, value_delimiter = ',')]
    pub events: Vec<f64>,
    /// Renewal times of the baseline.
    #[arg(long, value_delimiter = ',')]
    pub renewals: Vec<f64>,
    /// Events CSV written by `simulate`; path 0 is replayed.
    #[arg(long, conflicts_with = "events")]
    pub log: Option<PathBuf>,
    /// Renewals CSV written by `simulate`; path 0 is replayed.
    #[arg(long, conflicts_with = "renewals")]
    pub renewal_log: Option<PathBuf>,
    /// Evaluation times (default: the grid).
    #[arg(long, value_delimiter = ',')]
    pub at: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ValidateArgs {
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    pub mc_reps: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub ni_reps: usize,
    #[arg(long, default_value_t = 20_240_601)]
    pub seed: u64,
    /// Also estimate the convergence order of this configuration by halving its grid step twice.
    #[arg(long)]
    pub halving: Option<PathBuf>,
}

/// Applies `RHAWKES_THREADS`, then runs one command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Ok(v) = std::env::var("RHAWKES_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("RHAWKES_THREADS must be a count, got `{v}`")))?;
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Expect(a) => commands::cmd_expect(&a).map(|_| ()),
        Command::Simulate(a) => commands::cmd_simulate(&a).map(|_| ()),
        Command::Optimize(a) => commands::cmd_optimize(&a).map(|_| ()),
        Command::Replay(a) => commands::cmd_replay(&a).map(|_| ()),
        Command::Validate(a) => commands::cmd_validate(&a).map(|_| ()),
    }
}
