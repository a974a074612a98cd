mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rhyde::ErrorKind;

/// Robust hyperspectral denoising and rare-pixel detection.
#[derive(Debug, Parser)]
#[command(name = "rhyde", version)]
pub struct Cli {
    /// Seed for every random draw; recorded in each manifest.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving all outputs (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene with implanted rare pixels.
    Simulate(SimulateArgs),
    /// Denoise an HSC cube.
    Denoise(DenoiseArgs),
    /// Score pixels and, given a mask, evaluate the detector.
    Detect(DetectArgs),
    /// Compare an estimate against the clean cube.
    Evaluate(EvaluateArgs),
    /// Print an HSC header and its singular-value curve.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    #[arg(long, default_value_t = 100)]
    pub cols: usize,
    #[arg(long, default_value_t = 50)]
    pub bands: usize,
    /// Rank of the clean background.
    #[arg(long, default_value_t = 5)]
    pub p_true: usize,
    /// Fraction of pixels receiving the anomaly spectrum.
    #[arg(long, default_value_t = 0.0002)]
    pub implant_rate: f64,
    /// Norm of the anomaly spectrum, drawn orthogonal to the background.
    #[arg(long, default_value_t = 11.0)]
    pub anomaly_norm: f64,
    /// Per-band noise std is uniform on [0, noise_u].
    #[arg(long, default_value_t = 0.065)]
    pub noise_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenoiserName {
    Collab,
    Dct,
    Identity,
}

impl DenoiserName {
    pub fn as_str(self) -> &'static str {
        match self {
            DenoiserName::Collab => "collab",
            DenoiserName::Dct => "dct",
            DenoiserName::Identity => "identity",
        }
    }
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Noisy input cube.
    #[arg(long)]
    pub input: PathBuf,
    /// Subspace dimension.
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mu1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu3: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_value: f64,
    /// Outlier penalty; overrides the p-value rule.
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long, default_value_t = 30)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub rel_tol: f64,
    #[arg(long, value_enum, default_value_t = DenoiserName::Collab)]
    pub denoiser: DenoiserName,
    /// Denoiser option as key=value; repeatable.
    #[arg(long = "denoiser-opt", value_parser = parse_key_value)]
    pub denoiser_opts: Vec<(String, String)>,
    /// Apply the Anscombe transform around the solve.
    #[arg(long)]
    pub anscombe: bool,
    /// Known noise covariance (HSN1); estimated from the data otherwise.
    #[arg(long)]
    pub noise_cov: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Detector {
    /// Column norms of a rare-pixel cube (`s_hat.hsc`).
    Rhyde,
    /// Global RX on an image cube.
    Rx,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_enum, default_value_t = Detector::Rhyde)]
    pub detector: Detector,
    /// `s_hat.hsc` for rhyde, any image for rx.
    #[arg(long)]
    pub input: PathBuf,
    /// Ground-truth mask CSV; enables ROC output.
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub estimate: PathBuf,
    /// Use one peak for every band instead of each band's maximum.
    #[arg(long)]
    pub peak: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Also compute singular values and write `singular_values.csv`.
    #[arg(long)]
    pub singular_values: bool,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Process exit codes.
pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Invalid => 2,
        ErrorKind::Io => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
