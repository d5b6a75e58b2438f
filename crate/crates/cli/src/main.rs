//! `adaptv` command line: single solves, synthetic scenes and parameter
//! sweeps for the variational imaging toolkit.
//!
//! Exit codes: 0 success, 2 argument errors, 3 I/O errors, 4 solver errors
//! (divergence, degenerate inputs).

mod commands;
mod sweep;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adaptv", version, about = "Variational imaging with residual-adaptive regularization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// TV denoising of a grayscale image
    Denoise(DenoiseArgs),
    /// Two-phase segmentation of a grayscale image
    Segment(SegmentArgs),
    /// TV-L1 optical flow between two frames
    Flow(FlowArgs),
    /// Parameter sweeps producing a CSV of metric rows
    Sweep(sweep::SweepArgs),
    /// Deterministic synthetic scenes (phantoms, noise, motion pairs)
    Synth(SynthArgs),
}

/// Weight-rule flags shared by the solver commands.
#[derive(Args, Clone, Debug)]
pub struct WeightArgs {
    /// static (frozen constant weight) or adaptive (residual-driven)
    #[arg(long, value_parser = ["static", "adaptive"])]
    pub mode: Option<String>,
    /// Frozen weight in (0, 1); implies static mode
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Residual scale of the adaptive weight; implies adaptive mode
    #[arg(long)]
    pub beta: Option<f64>,
    /// Minimal-regularization floor in [0, 1); nonzero switches the
    /// adaptive weight to its smoothed form
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Gaussian sigma for residual smoothing; nonzero switches the adaptive
    /// weight to its smoothed form
    #[arg(long)]
    pub kernel_sigma: Option<f64>,
}

/// ADMM parameter flags shared by the solver commands.
#[derive(Args, Clone, Debug)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 8.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    /// Relative-change stopping tolerance
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Iterations between adaptive weight refreshes
    #[arg(long, default_value_t = 1)]
    pub lambda_every: usize,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub input: std::path::PathBuf,
    #[arg(long)]
    pub output: std::path::PathBuf,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the per-iteration trace CSV here
    #[arg(long)]
    pub trace: Option<std::path::PathBuf>,
    /// Clean reference; prints "psnr=<v> ssim=<v>" when given
    #[arg(long)]
    pub reference: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: std::path::PathBuf,
    /// Binary mask image output
    #[arg(long)]
    pub output: std::path::PathBuf,
    /// Optional relaxed-indicator image output
    #[arg(long)]
    pub u_output: Option<std::path::PathBuf>,
    /// Mask threshold in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub trace: Option<std::path::PathBuf>,
    /// Ground-truth mask; prints "f=<v>" when given
    #[arg(long)]
    pub gt_mask: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    /// First frame
    #[arg(long)]
    pub input: std::path::PathBuf,
    /// Second frame
    #[arg(long)]
    pub input2: std::path::PathBuf,
    /// Output .flo path
    #[arg(long)]
    pub output: std::path::PathBuf,
    /// Optional color-coded flow visualization (PNG)
    #[arg(long)]
    pub color: Option<std::path::PathBuf>,
    /// Pyramid levels; defaults to a coarsest side of about 16 pixels
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub scale: f64,
    #[arg(long, default_value_t = 3)]
    pub warps: usize,
    #[arg(long, default_value_t = 50)]
    pub inner_iters: usize,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub trace: Option<std::path::PathBuf>,
    /// Ground-truth .flo; prints "ae=<v> ee=<v>" when given
    #[arg(long)]
    pub gt_flo: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_parser = ["phantom", "biased-noise", "translation", "two-motion"])]
    pub kind: String,
    #[arg(long)]
    pub out_dir: std::path::PathBuf,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Phantom outside level
    #[arg(long, default_value_t = 0.25)]
    pub lo: f64,
    /// Phantom inside level
    #[arg(long, default_value_t = 0.75)]
    pub hi: f64,
    #[arg(long, value_parser = ["disk", "blob"], default_value = "disk")]
    pub shape: String,
    /// Uniform Gaussian noise level
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Peak level of spatially ramped Gaussian noise
    #[arg(long, default_value_t = 0.0)]
    pub sigma_max: f64,
    #[arg(long, value_parser = ["half-plane", "radial"], default_value = "half-plane")]
    pub profile: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base image for biased-noise (defaults to a generated texture)
    #[arg(long)]
    pub input: Option<std::path::PathBuf>,
    /// Translation (or left-region motion for two-motion scenes)
    #[arg(long, default_value_t = 2.0)]
    pub tx: f64,
    #[arg(long, default_value_t = 1.0)]
    pub ty: f64,
    /// Right-region motion for two-motion scenes
    #[arg(long, default_value_t = 0.0)]
    pub tx2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub ty2: f64,
}

/// Errors carrying their process exit code.
#[derive(Debug)]
pub enum CliError {
    Args(String),
    Io(String),
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Args(_) => 2,
            CliError::Io(_) => 3,
            CliError::Solver(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Args(m) | CliError::Io(m) | CliError::Solver(m) => m,
        }
    }
}

impl From<adaptv::Error> for CliError {
    fn from(e: adaptv::Error) -> Self {
        use adaptv::Error as E;
        match e {
            E::Io(_) | E::Parse { .. } | E::BadMagic { .. } | E::UnsupportedFormat(_) => {
                CliError::Io(e.to_string())
            }
            E::InvalidConfig(_) | E::InvalidInterval { .. } => CliError::Args(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 0 for --help/--version and 2 for usage errors
            e.exit();
        }
    };
    let result = match cli.command {
        Command::Denoise(args) => commands::run_denoise(&args),
        Command::Segment(args) => commands::run_segment(&args),
        Command::Flow(args) => commands::run_flow(&args),
        Command::Sweep(args) => sweep::run_sweep(&args),
        Command::Synth(args) => commands::run_synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
