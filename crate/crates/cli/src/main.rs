//! `cueval`: estimate the clinical utility of deterministic treatment
//! regimes from tabular data, run the simulation lab, learn regimes, and
//! print enumeration-oracle truths.
//!
//! Every command is deterministic given its configuration (seed included);
//! re-running a command overwrites its outputs with identical bytes.
//!
//! Exit codes: 0 success, 1 estimation failure (positivity or convergence),
//! 2 configuration error.

mod commands;
mod config;
mod forest;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cueval",
    version,
    about = "Clinical-utility evaluation of treatment regimes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo simulation study for a registered setting.
    Simulate(SimulateArgs),
    /// Estimate regime values and clinical utilities on a CSV dataset.
    Estimate(EstimateArgs),
    /// Learn a regime from data via random Fourier features.
    LearnRegime(LearnArgs),
    /// Print exact enumeration-oracle truths for a setting.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config; flags override scalar fields.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Setting id: S1, S2, S3, or S2M.
    #[arg(long)]
    setting: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Bootstrap replicates per replication.
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated estimators (default: all four).
    #[arg(long)]
    estimators: Option<String>,
    /// Comma-separated CI methods: bootstrap, sandwich.
    #[arg(long)]
    ci: Option<String>,
    #[arg(long)]
    level: Option<f64>,
    /// Output directory (default: current directory).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// JSON analysis config (dataset, schema, regimes, models, CIs).
    #[arg(long)]
    config: std::path::PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Negate displayed differences so that improvement is positive when
    /// smaller outcomes are better. Presentation only: files are unchanged.
    #[arg(long)]
    report_improvement: bool,
    /// Cap inverse-propensity weights instead of failing on positivity.
    #[arg(long)]
    weight_cap: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct LearnArgs {
    /// JSON config; flags override scalar fields.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    #[arg(long)]
    data: Option<std::path::PathBuf>,
    #[arg(long)]
    schema: Option<std::path::PathBuf>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optimization direction: smaller (default) or larger.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Setting id: S1, S2, S3, or S2M.
    #[arg(long)]
    setting: String,
    #[arg(long)]
    json: bool,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    fn config(error: anyhow::Error) -> CliError {
        CliError { code: 2, error }
    }

    fn estimation(error: anyhow::Error) -> CliError {
        CliError { code: 1, error }
    }

    /// Classifies a core error: positivity, convergence, and resampling
    /// problems are estimation failures; everything else is configuration.
    fn from_core(error: cueval_core::Error) -> CliError {
        use cueval_core::Error as E;
        let code = match &error {
            E::Positivity { .. }
            | E::BootstrapUnstable { .. }
            | E::Fit(_)
            | E::Sandwich(_)
            | E::SingularBread { .. } => 1,
            _ => 2,
        };
        CliError {
            code,
            error: error.into(),
        }
    }
}

impl From<cueval_core::Error> for CliError {
    fn from(error: cueval_core::Error) -> Self {
        CliError::from_core(error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Estimate(args) => commands::estimate::run(args),
        Command::LearnRegime(args) => commands::learn::run(args),
        Command::Oracle(args) => commands::oracle::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}

/// Seed resolution order: flag, config file, `CU_EVAL_SEED`, default 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config)
        .or_else(|| {
            std::env::var("CU_EVAL_SEED")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0)
}
