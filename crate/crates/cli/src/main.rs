//! `denl`: command-line driver for synthesis, stacks, datasets, training,
//! evaluation, calibration and the experiment scripts.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use denl_core::Error;

use plot::PlotKind;

/// Exit status classes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad configuration (exit 1).
    Usage(String),
    /// Unreadable, malformed or inconsistent inputs (exit 2).
    Data(String),
    /// Non-finite values or failed numerical preconditions (exit 3).
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NonFinite(_) | Error::DegenerateRange | Error::NoCrossing { .. } | Error::Calibration(_) => CliError::Numeric(msg),
            Error::Config(_) | Error::InvalidOrder(_) => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "denl", version = concat!(env!("CARGO_PKG_VERSION"), " (NLDS 1, NLNW 1)"), about)]
struct Cli {
    /// TOML file with one table per subcommand, e.g. `[train]`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Object JSON → raw signal CSV and its FFT amplitude CSV.
    Simulate(SimulateArgs),
    /// Raw signal CSV → compensation stack CSV (and optional PGM preview).
    Stack(StackArgs),
    /// Generate a binary dataset of (stack, ground truth) pairs.
    GenDataset(GenDatasetArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Run a trained network on a signal CSV.
    Infer(InferArgs),
    /// GoF report per interface count.
    Eval(EvalArgs),
    /// Two mirror signals → calibration map JSON.
    Calibrate(CalibrateArgs),
    /// Apply a calibration map to a signal.
    Linearize(LinearizeArgs),
    /// Mirror at several depths through raw, network and classical pipelines.
    MirrorStudy(MirrorStudyArgs),
    /// Assemble a multi-line image.
    Bscan(BscanArgs),
    /// Throughput of stack construction and inference.
    Bench(BenchArgs),
    /// CSV → SVG line plot or heatmap.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// Object description (JSON).
    #[arg(long)]
    pub object: Option<PathBuf>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for signal.csv and amplitude.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct StackArgs {
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[arg(long)]
    pub order: Option<u8>,
    /// Largest ladder coefficient in radians.
    #[arg(long)]
    pub max: Option<f64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct GenDatasetArgs {
    #[arg(long)]
    pub order: Option<u8>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `toy` (16 × 256) or `full` (32 × 1024).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub a2_bound: Option<f64>,
    #[arg(long)]
    pub a3_bound: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Steps of linear learning-rate ramp at the start of training.
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    /// `sigmoid` or `clamp`.
    #[arg(long)]
    pub activation: Option<String>,
    /// Weights output; the report and model card are written alongside.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Single-threaded everywhere.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub deterministic: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct InferArgs {
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// GoF threshold as a fraction (0.001 = 0.1%).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output prefix: writes `<out>.csv` and `<out>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub allow_order_mismatch: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub mirror1: Option<PathBuf>,
    #[arg(long)]
    pub mirror2: Option<PathBuf>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct LinearizeArgs {
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[arg(long)]
    pub calib: Option<PathBuf>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct MirrorStudyArgs {
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub depths: Option<usize>,
    /// Second-order system phase reached at the deepest mirror.
    #[arg(long)]
    pub a2_at_max: Option<f64>,
    /// Third-order system phase reached at the deepest mirror.
    #[arg(long)]
    pub a3_at_max: Option<f64>,
    #[arg(long)]
    pub dispersion_a2: Option<f64>,
    #[arg(long)]
    pub dispersion_a3: Option<f64>,
    #[arg(long)]
    pub net1: Option<PathBuf>,
    #[arg(long)]
    pub net2: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BscanArgs {
    /// CSV with one raw signal per row; omit to use the synthetic tilted plate.
    #[arg(long)]
    pub signals: Option<PathBuf>,
    #[arg(long)]
    pub lines: Option<usize>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// `raw`, `net1`, `net2` or `baseline`.
    #[arg(long)]
    pub pipeline: Option<String>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub calib: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct PlotArgs {
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<PlotKind>,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.config.as_deref();
    match &cli.command {
        Command::Simulate(a) => commands::simulate(cfg, a),
        Command::Stack(a) => commands::stack(cfg, a),
        Command::GenDataset(a) => commands::gen_dataset(cfg, a),
        Command::Train(a) => commands::train(cfg, a),
        Command::Infer(a) => commands::infer(cfg, a),
        Command::Eval(a) => commands::eval(cfg, a),
        Command::Calibrate(a) => commands::calibrate(cfg, a),
        Command::Linearize(a) => commands::linearize(cfg, a),
        Command::MirrorStudy(a) => commands::mirror_study(cfg, a),
        Command::Bscan(a) => commands::bscan(cfg, a),
        Command::Bench(a) => commands::bench(cfg, a),
        Command::Plot(a) => commands::plot(cfg, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
