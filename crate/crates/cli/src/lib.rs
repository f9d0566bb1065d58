//! `brnn` command-line pipeline: dataset generation, balancing, training,
//! sweeps, binned summaries, meta-learning and CSV export.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error,
//! 3 training diverged (`train` only; logs are still written).

mod commands;
pub mod export;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use brnn_core::sweep::BinMetric;
use brnn_core::Preset;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "brnn", version, about = "Block-sparse RNN experiments")]
pub struct Cli {
    /// Master seed for every random draw of the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for sweeps and forest training (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a sequence dataset container.
    Data(DataArgs),
    /// Specify a network from task dimensions and a parameter budget.
    Balance(BalanceArgs),
    /// Train one network and write its checkpoint and epoch log.
    Train(TrainArgs),
    /// Train randomly sampled networks into a run registry.
    Sweep(SweepArgs),
    /// Summarize a registry by hidden proportion and model sparsity.
    Bins(BinsArgs),
    /// Fit the random-forest meta-predictor on a registry.
    MetaTrain(MetaTrainArgs),
    /// Score a meta-predictor on its held-out runs.
    MetaEval(MetaEvalArgs),
    /// Write plotting CSVs from a registry.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataTask {
    /// Anomaly sequences over MNIST digits (needs the IDX files).
    Rad,
    /// Anomaly sequences over synthetic glyphs.
    RadLite,
    /// Regression against a fixed random teacher RNN.
    Bc,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long, value_enum)]
    pub task: DataTask,
    /// Number of sequences [default: 5000 rad, 2500 rad-lite, 1000 bc].
    #[arg(long)]
    pub count: Option<usize>,
    /// Frames per sequence [default: 9 rad, 5 rad-lite, 200 bc].
    #[arg(long)]
    pub seq_len: Option<usize>,
    /// Fraction of sequences moved to validation.
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    /// Glyph side length for rad-lite.
    #[arg(long, default_value_t = 10)]
    pub side: usize,
    /// Directory with the MNIST IDX files [default: $BRNN_DATA_DIR].
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    /// Seed fixing the bc teacher network.
    #[arg(long, default_value_t = 0)]
    pub teacher_seed: u64,
    /// bc input width.
    #[arg(long, default_value_t = brnn_core::data::bc::BC_INPUT_DIM)]
    pub input_dim: usize,
    /// bc output width.
    #[arg(long, default_value_t = brnn_core::data::bc::BC_OUTPUT_DIM)]
    pub output_dim: usize,
    /// Output file [default: <out-dir>/<task>.bin].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    pub input_dim: usize,
    #[arg(long)]
    pub output_dim: usize,
    /// Parameter budget, biases included.
    #[arg(long)]
    pub budget: usize,
    #[arg(long, default_value_t = 0.5)]
    pub target_hp: f64,
    /// Sparsity grid step.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value_t = 4096)]
    pub max_hidden: usize,
    /// Output file [default: <out-dir>/spec.txt].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset container written by `data`.
    #[arg(long)]
    pub data: PathBuf,
    /// Spec file written by `balance` or by hand.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub spec: Option<PathBuf>,
    /// Named layout sized to --budget.
    #[arg(long, requires = "budget")]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Learning rate [default: the spec's].
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 25)]
    pub epochs: usize,
    /// Global gradient-norm clip.
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,
    #[arg(long)]
    pub no_clip: bool,
    /// Checkpoint path [default: <out-dir>/model.ckpt].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub runs: usize,
    /// Fixed parameter budget per run.
    #[arg(long, conflicts_with = "hidden_dim", required_unless_present = "hidden_dim")]
    pub budget: Option<usize>,
    /// Free-budget mode: one hidden size for every run.
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long, default_value_t = 4096)]
    pub max_hidden: usize,
    #[arg(long, default_value_t = 25)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,
    #[arg(long)]
    pub no_clip: bool,
    #[arg(long, default_value_t = 0)]
    pub first_run_id: u64,
    /// Task label stored in each record [default: the dataset file stem].
    #[arg(long)]
    pub task: Option<String>,
    /// Store wall-clock seconds per run (breaks byte reproducibility).
    #[arg(long)]
    pub record_timing: bool,
    /// Registry file [default: <out-dir>/registry.jsonl].
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BinsArgs {
    #[arg(long)]
    pub registry: PathBuf,
    /// One metric only [default: both].
    #[arg(long)]
    pub metric: Option<BinMetric>,
}

#[derive(Debug, Args)]
pub struct MetaTrainArgs {
    #[arg(long)]
    pub registry: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub trees: usize,
    #[arg(long, default_value_t = 10)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 2)]
    pub min_leaf: usize,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub feature_fraction: f64,
    #[arg(long)]
    pub no_bootstrap: bool,
    /// Fraction of runs held out for meta-eval; 0 trains on everything.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    /// Seed of the holdout shuffle [default: --seed].
    #[arg(long)]
    pub holdout_seed: Option<u64>,
    /// Model path [default: <out-dir>/forest.json].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetaEvalArgs {
    #[arg(long)]
    pub registry: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub registry: PathBuf,
    /// curves, scatter, bins, predicted-vs-actual (alias pred) or features.
    #[arg(long)]
    pub kind: String,
    /// Meta-predictor for predicted-vs-actual.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

/// Failure of a command, mapped onto an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(brnn_core::Error),
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Diverged(_) => EXIT_DIVERGED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::Diverged(m) => write!(f, "training diverged: {m}"),
        }
    }
}

impl From<brnn_core::Error> for CliError {
    fn from(e: brnn_core::Error) -> Self {
        CliError::Data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(brnn_core::Error::Format(format!("csv: {e}")))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Messages go to stdout and stderr.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command inside a pool bounded by `--threads`.
pub fn run(cli: &Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t as usize);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Data(brnn_core::Error::Config(format!("thread pool: {e}"))))?;
    pool.install(|| commands::execute(cli))
}
