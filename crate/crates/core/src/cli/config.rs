use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compress::Scheme;
use crate::data::{load_mnist, synth_blobs, Dataset};
use crate::error::{Error, Result};
use crate::optim::{Optimizer, TrainConfig};

/// Everything a run needs, read from a TOML file and then overridden by
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub model: ModelSection,
    pub train: TrainSection,
    pub data: DataSection,
    pub compress: CompressSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            model: ModelSection::default(),
            train: TrainSection::default(),
            data: DataSection::default(),
            compress: CompressSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Widths `[input, hidden…, classes]`.
    pub dims: Vec<usize>,
    pub n_factors: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            dims: vec![784, 96, 96, 96, 96, 96, 10],
            n_factors: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Trailing training examples held out to pick the best epoch; 0 keeps
    /// the last epoch.
    pub validation: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lr: t.lr,
            weight_decay: t.weight_decay,
            epochs: 20,
            batch_size: t.batch_size,
            optimizer: t.optimizer,
            validation: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Directory with the four MNIST IDX files (optionally gzipped).
    pub mnist_dir: PathBuf,
    /// Use Gaussian blobs instead of MNIST.
    pub synth: Option<SynthSection>,
    /// Keep only the first this-many training examples.
    pub train_limit: Option<usize>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            mnist_dir: PathBuf::from("data/mnist"),
            synth: None,
            train_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_per_class: usize,
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    pub test_per_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressSection {
    pub scheme: Scheme,
    /// Kept fraction: per layer for LSVT, of the pooled spectrum for GSVT,
    /// and of the dense parameter count for the ISVT target.
    pub keep: f64,
    /// Fixed LSVT rank; overrides `keep` for that scheme.
    pub rank: Option<usize>,
    pub step: usize,
    pub probe: usize,
    /// ISVT parameter target; defaults to `keep` times the dense count.
    pub target_params: Option<usize>,
    /// Start ISVT from the GSVT plan at this fraction.
    pub warm_start: Option<f64>,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
}

impl Default for CompressSection {
    fn default() -> Self {
        Self {
            scheme: Scheme::Gsvt,
            keep: 0.2,
            rank: None,
            step: 500,
            probe: 120,
            target_params: None,
            warm_start: None,
            finetune_epochs: 0,
            finetune_lr: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub fractions: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            fractions: (1..=20).map(|i| i as f64 * 0.05).collect(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.train.lr,
            weight_decay: self.train.weight_decay,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed: self.seed,
            optimizer: self.train.optimizer,
            ..TrainConfig::default()
        }
    }

    pub fn finetune_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.compress.finetune_lr,
            weight_decay: 0.0,
            epochs: self.compress.finetune_epochs,
            batch_size: self.train.batch_size,
            seed: self.seed,
            optimizer: Optimizer::Sgd,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.model.dims.len() < 2 || self.model.dims.contains(&0) {
            return bad(format!(
                "model.dims {:?} needs at least two positive widths",
                self.model.dims
            ));
        }
        if self.model.n_factors == 0 {
            return bad("model.n_factors must be at least 1".into());
        }
        if !(self.compress.keep > 0.0 && self.compress.keep <= 1.0) {
            return bad(format!("compress.keep {} is outside (0, 1]", self.compress.keep));
        }
        if self.compress.step == 0 || self.compress.probe == 0 {
            return bad("compress.step and compress.probe must be positive".into());
        }
        self.train_config().validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Train and test splits, with `train_limit` applied to the former.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        let (train, test) = match self.data.synth {
            // One draw so both splits share centers; examples are
            // interleaved by class, so the prefix is class-balanced.
            Some(s) => synth_blobs(
                s.n_per_class + s.test_per_class,
                s.classes,
                s.dim,
                s.separation,
                self.seed,
            )?
            .split_at(s.n_per_class * s.classes)?,
            None => {
                let m = load_mnist(&self.data.mnist_dir)?;
                (m.train, m.test)
            }
        };
        let train = match self.data.train_limit {
            Some(n) if n < train.len() => train.split_at(n)?.0,
            _ => train,
        };
        Ok((train, test))
    }
}
