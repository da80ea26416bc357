//! The `lorita` command line: argument parsing, configuration and the
//! subcommands. `main` only parses, calls [`run`] and maps the outcome to an
//! exit code.

mod commands;
pub mod config;
pub mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::compress::Scheme;
use crate::error::{Error, Result};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "lorita",
    version,
    about = "Low-rank induced training and SVD compression of MLPs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a factorized network and write a checkpoint plus per-epoch CSV.
    Train(TrainArgs),
    /// Truncate a trained checkpoint, optionally fine-tune, and summarize.
    Compress(CheckpointArgs),
    /// Score a checkpoint on the test split.
    Eval(CheckpointArgs),
    /// Accuracy drop across retained fractions, as CSV.
    Sweep(SweepArgs),
    /// Normalized singular values of every collapsed layer, as CSV.
    Spectrum(CheckpointArgs),
    /// Numerical checks of the factorization and rescaling identities.
    Verify(Common),
    /// Parameter and FLOP counts of a reference architecture or checkpoint.
    Count(CountArgs),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Factors per weight matrix (N).
    #[arg(long)]
    pub n_factors: Option<usize>,
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Kept fraction for the compression scheme.
    #[arg(long)]
    pub keep: Option<f64>,
    /// Fixed per-layer rank (LSVT).
    #[arg(long)]
    pub rank: Option<usize>,
    /// Parameters removed per ISVT round.
    #[arg(long)]
    pub step: Option<usize>,
    /// ISVT probe-set size.
    #[arg(long)]
    pub probe: Option<usize>,
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// MNIST directory with the four IDX files.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckpointArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint written by `train` (or `compress`, for `eval`).
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated ascending fractions in (0, 1].
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub common: Common,
    /// `resnet20`, `vgg16` or `mlp` (the configured model).
    #[arg(long, conflicts_with = "checkpoint")]
    pub arch: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

/// Config file (or defaults) with the flags applied on top.
pub fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.n_factors {
        cfg.model.n_factors = v;
    }
    if let Some(v) = common.scheme {
        cfg.compress.scheme = v;
    }
    if let Some(v) = common.keep {
        cfg.compress.keep = v;
    }
    if let Some(v) = common.rank {
        cfg.compress.rank = Some(v);
    }
    if let Some(v) = common.step {
        cfg.compress.step = v;
    }
    if let Some(v) = common.probe {
        cfg.compress.probe = v;
    }
    if let Some(v) = common.finetune_epochs {
        cfg.compress.finetune_epochs = v;
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &common.data {
        cfg.data.mnist_dir = v.clone();
        cfg.data.synth = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// How a successful invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// `verify` ran but at least one check failed.
    VerificationFailed,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Compress(a) => commands::compress(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Verify(c) => commands::verify(&c),
        Command::Count(a) => commands::count(&a),
    }
}

/// 1 for usage and configuration problems, 2 for everything that went
/// wrong while running.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::RankOutOfRange { .. } => 1,
        _ => 2,
    }
}
