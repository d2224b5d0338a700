//! Command-line front end.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
pub use config::{FitSettings, Preset, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "nmsysid", version, about = "Identify non-Markovian state-space models from trajectory data")]
pub struct Cli {
    /// Override the random seed of the suite configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration (suite and solver settings).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in configuration used when --config is absent.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory (generate) or file (all other commands).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress summary tables.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the cylinder benchmark suite.
    Generate,
    /// Fit a model with projected gradient descent.
    Fit(FitArgs),
    /// Fit a Markovian model by truncated-SVD least squares.
    Dmdc(DmdcArgs),
    /// Re-simulate every trajectory of a dataset with a model.
    Simulate(SimulateArgs),
    /// Per-trajectory reconstruction errors and an aggregate summary.
    Evaluate(EvaluateArgs),
    /// Render CSV or dataset files as SVG line charts.
    Plot(PlotArgs),
    /// Tabulate several evaluation reports side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstraintPreset {
    A1b,
    A2b,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShiftArg {
    Identity,
    Zero,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training dataset JSON.
    #[arg(long)]
    pub train: PathBuf,
    /// `a1b`, `a2b`, `none`, or a constraint-spec JSON file.
    #[arg(long, default_value = "a1b")]
    pub constraints: String,
    /// Graph JSON providing the sparsity mask.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Shift applied by the Laplacian constraint (`a2b`).
    #[arg(long, value_enum, default_value = "identity")]
    pub laplacian_shift: ShiftArg,
    /// Kernel bandwidth Q (defaults to q + 1).
    #[arg(long = "Q", alias = "bandwidth")]
    pub bandwidth: Option<usize>,
    /// Initial stepsize (overrides the configuration).
    #[arg(long)]
    pub t0: Option<f64>,
    /// Backtracking divisor, > 1.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Number of gradient steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial model JSON.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Learning-curve CSV output.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DmdcArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Truncation rank; scanned against the training set when omitted.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Fit on all training trajectories instead of one.
    #[arg(long)]
    pub pooled: bool,
    /// Index of the fitting trajectory.
    #[arg(long, default_value_t = 0)]
    pub fit_index: usize,
    /// Rank-scan CSV output.
    #[arg(long)]
    pub scan: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Aggregate JSON output (defaults to `<report>.summary.json`).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Learning curves, log-scale loss.
    Curve,
    /// DMDc rank scan, log-scale error.
    Scan,
    /// Truth against prediction for selected cells.
    Traces,
    /// Energy deviation of predictions from the truth.
    Energy,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// Input CSVs (curve, scan) or prediction datasets (traces, energy).
    #[arg(long = "input", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Ground-truth dataset (traces, energy).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub trajectory: usize,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub cells: Vec<usize>,
    /// Series labels, one per input (defaults to file stems).
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Evaluation report CSVs.
    #[arg(long = "input", num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json { .. } | Error::Csv(_) => 2,
        Error::Io { .. } => 3,
        _ => 4,
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
