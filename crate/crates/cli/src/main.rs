//! `sparsefilt`: run Monte-Carlo scenarios, predict steady-state bias,
//! verify invariants and export results.
//!
//! Exit codes: 0 success, 1 verification failure or (when the scenario asks
//! for it) divergence, 2 schema/usage error, 3 I/O error, 4 theory
//! precondition violated.

mod commands;
mod scenario;
mod verify;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Failure(String),
    Schema(String),
    Io(String),
    Theory(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Io(_) => 3,
            CliError::Theory(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Failure(m) => write!(f, "{m}"),
            CliError::Schema(m) => write!(f, "invalid scenario: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Theory(m) => write!(f, "theory precondition: {m}"),
        }
    }
}

impl From<sparsefilt::Error> for CliError {
    fn from(e: sparsefilt::Error) -> Self {
        use sparsefilt::Error as E;
        match e {
            E::Io(m) => CliError::Io(m),
            E::OutsideStabilityBound(_) | E::Singular | E::Degenerate(_) => CliError::Theory(e.to_string()),
            other => CliError::Schema(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "sparsefilt", version, about = "Sparse adaptive filter experiments")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Scenario override KEY=VALUE (dotted keys reach nested fields).
    #[arg(long = "override", global = true, value_name = "K=V")]
    overrides: Vec<String>,
    /// Snapshot stride.
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print per-tap detail.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write curves, metrics, bias table and result.json.
    Run { scenario: PathBuf },
    /// Write the closed-form steady-state prediction for a scenario.
    Predict { scenario: PathBuf },
    /// Check a group of invariants at fixed seeds.
    Verify { suite: Suite },
    /// Rewrite the CSV/JSON files of a saved result.json.
    Export {
        result: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::All)]
        format: ExportFormat,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Transform,
    Discretization,
    Reductions,
    Projection,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
    Json,
    All,
}

pub struct Options {
    pub out: PathBuf,
    pub overrides: Vec<(String, String)>,
    pub verbose: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SPARSEFILT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Schema(format!("SPARSEFILT_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failure(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let mut overrides = cli
        .overrides
        .iter()
        .map(|s| scenario::split_override(s).map(|(k, v)| (k.to_string(), v.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(stride) = cli.stride {
        overrides.push(("stride".into(), stride.to_string()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let opts = Options {
        out: cli.out,
        overrides,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Run { scenario } => commands::run(&scenario, &opts),
        Command::Predict { scenario } => commands::predict(&scenario, &opts),
        Command::Verify { suite } => verify::run(suite),
        Command::Export { result, format } => commands::export(&result, format, &opts),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sparsefilt: {e}");
            ExitCode::from(e.code())
        }
    }
}
