use std::path::PathBuf;

/// Errors produced by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {}x{} and {}x{}", left.0, left.1, right.0, right.1)]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("svd did not converge after {sweeps} sweeps (max relative off-diagonal {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("rank {rank} out of range 1..={max}{}", layer.map(|l| format!(" for layer {l}")).unwrap_or_default())]
    RankOutOfRange {
        layer: Option<usize>,
        rank: usize,
        max: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("activation cache does not match the model: {0}")]
    StaleCache(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: bad magic number 0x{found:08x} (expected 0x{expected:08x})", path.display())]
    BadMagic { path: PathBuf, expected: u32, found: u32 },

    #[error("{}: truncated file, expected {expected} bytes, found {actual}", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("loss became non-finite at epoch {epoch}, batch {batch}: {loss}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
