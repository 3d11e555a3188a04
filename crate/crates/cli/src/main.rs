//! `serialsdf` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serialsdf::curves::CurveKind;
use serialsdf::{Error, Result};

use crate::config::RunConfig;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SERIALSDF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "serialsdf", version, about = "Point cloud to SDF and mesh reconstruction")]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured space-filling curve.
    #[arg(long, global = true)]
    curve: Option<CurveKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic scene into a point cloud and ground-truth surface samples.
    Gen(GenArgs),
    /// Serialize a cloud and dump its sorted curve codes.
    Index(IndexArgs),
    /// Recall of serialized neighborhoods against exact k-NN, per curve and scale count.
    NeighborsBench(BenchArgs),
    /// Reconstruct a mesh from a point cloud.
    Reconstruct(ReconstructArgs),
    /// Train decoder weights on synthetic scenes.
    Train(TrainArgs),
    /// Score a mesh against ground-truth samples.
    Eval(EvalArgs),
    /// Split a cloud into contiguous curve-code ranges.
    Segment(SegmentArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scene description (JSON). Without it a preset is used.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// One of `sphere`, `box`, `desk`.
    #[arg(long, default_value = "sphere")]
    pub preset: String,
    /// Number of stratified ground-truth surface samples.
    #[arg(long, default_value_t = 100_000)]
    pub gt_samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Cloud to index. Without it a uniform random cloud in the unit cube is used.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Size of the random cloud.
    #[arg(long, default_value_t = 50_000)]
    pub points: usize,
    #[arg(long, default_value_t = 1000)]
    pub queries: usize,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    /// Half-width of the sorted search window; defaults to 2k.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `imls` or a decoder weight file; overrides the config.
    #[arg(long)]
    pub decoder: Option<String>,
    /// Extraction cell in meters; overrides the config.
    #[arg(long)]
    pub cell: Option<f64>,
    /// `ply` or `obj`.
    #[arg(long, default_value = "ply")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Scene descriptions (JSON); defaults to the sphere and box presets.
    #[arg(long)]
    pub scene: Vec<PathBuf>,
    /// Optimizer steps; overrides the config.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Ground truth: a point cloud, or a mesh (sampled like the prediction).
    #[arg(long)]
    pub gt: PathBuf,
    /// F-score threshold in meters; overrides the config.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Points sampled from the mesh; overrides the config.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub segments: usize,
    /// Also reconstruct each segment and write the combined mesh.
    #[arg(long)]
    pub mesh: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParams(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParams(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(curve) = cli.curve {
        cfg.curve = curve;
    }
    match cli.command {
        Command::Gen(a) => commands::gen(cfg, &a),
        Command::Index(a) => commands::index(cfg, &a),
        Command::NeighborsBench(a) => commands::neighbors_bench(cfg, &a),
        Command::Reconstruct(a) => commands::reconstruct(cfg, &a),
        Command::Train(a) => commands::train(cfg, &a),
        Command::Eval(a) => commands::eval(cfg, &a),
        Command::Segment(a) => commands::segment(cfg, &a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
