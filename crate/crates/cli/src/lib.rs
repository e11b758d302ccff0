//! Batch front-end for VPP frequency-response aggregation, security surfaces
//! and joint energy/inertia/droop clearing.

mod commands;
mod files;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use files::{load_scenario, read_artifact, ClearingFile, InputRecord, Manifest, OutputRecord, SCHEMA_VERSION};

/// Output directory used when neither `--out` nor the environment sets one.
pub const DEFAULT_OUT: &str = "vppfr-out";
pub const OUT_ENV: &str = "VPPFR_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "vppfr",
    version,
    about = "VPP frequency response, security surfaces and IPFR market clearing"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario document; the bundled IEEE 30-bus day when omitted.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Directory of fitted VPP models (`<vpp>.toml`) from `aggregate`.
    #[arg(long, global = true)]
    pub aggregates: Option<PathBuf>,
    #[arg(long, global = true, env = OUT_ENV, default_value = DEFAULT_OUT)]
    pub out: PathBuf,
    /// Seed for offer draws and fitting pools; the scenario seed by default.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Reduced model order.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub order: Option<u8>,
    /// Upper limit on nadir planes.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub planes: Option<u32>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub parallel: Option<u32>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit reduced frequency-response models of every VPP.
    Aggregate,
    /// Simulate one VPP in the host system after a disturbance.
    Simulate(SimulateArgs),
    /// Build the piecewise-linear nadir surface.
    Security,
    /// Run SCUC, continuous SCUC and SCED and price the result.
    Clear(ClearArgs),
    /// Re-check cleared periods against the frequency limits.
    Audit(ClearingInput),
    /// Plot-ready mix, price and settlement tables.
    Report(ClearingInput),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// VPP name; the first one when omitted.
    #[arg(long)]
    pub vpp: Option<String>,
    /// Disturbance, MW; the scenario's mean when omitted.
    #[arg(long)]
    pub delta_d: Option<f64>,
    #[arg(long, default_value_t = 30.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ClearArgs {
    /// Surface from `security`; built on the fly when omitted.
    #[arg(long)]
    pub surface: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClearingInput {
    /// Output of `clear`; `<out>/clearing.json` when omitted.
    #[arg(long)]
    pub clearing: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Aggregate => "aggregate",
            Command::Simulate(_) => "simulate",
            Command::Security => "security",
            Command::Clear(_) => "clear",
            Command::Audit(_) => "audit",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("{file}: {message}")]
    Schema { file: String, message: String },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Aggregation(#[from] vppfr_core::aggregation::AggregationError),
    #[error(transparent)]
    Dynamics(#[from] vppfr_core::dynamics::DynamicsError),
    #[error(transparent)]
    Security(#[from] vppfr_core::security::SecurityError),
    #[error(transparent)]
    Market(#[from] vppfr_core::market::MarketError),
    #[error("frequency audit failed in periods {0:?}")]
    Audit(Vec<usize>),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Machine-readable error category.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingFile(_) => "missing_file",
            CliError::Schema { .. } => "schema",
            CliError::Scenario(_) => "scenario",
            CliError::Mismatch(_) => "mismatch",
            CliError::Aggregation(_) => "aggregation",
            CliError::Dynamics(_) => "dynamics",
            CliError::Security(_) => "security",
            CliError::Market(_) => "market",
            CliError::Audit(_) => "audit",
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Resolved settings of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub scenario: Option<PathBuf>,
    pub aggregates: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub order: usize,
    pub planes: Option<usize>,
    pub parallel: Option<usize>,
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        let c = cli.common;
        RunConfig {
            command: cli.command,
            scenario: c.scenario,
            aggregates: c.aggregates,
            out: c.out,
            seed: c.seed,
            order: c.order.map_or(2, usize::from),
            planes: c.planes.map(|p| p as usize),
            parallel: c.parallel.map(|p| p as usize),
        }
    }
}

/// Runs one subcommand and writes its artifacts and manifest under `out`.
pub fn run(config: &RunConfig) -> Result<Manifest, CliError> {
    match config.parallel {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("--parallel {n}: {e}")))?;
            pool.install(|| commands::dispatch(config))
        }
        None => commands::dispatch(config),
    }
}
