//! Datasets: MNIST IDX files, synthetic blobs, subsampling and splits.

mod idx;
mod synth;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub use idx::{load_idx, load_mnist, write_idx, MnistSplit};
pub use synth::synth_blobs;

/// Labelled examples, one feature row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Mat,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Mat, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.rows() != labels.len() {
            return Err(Error::CountMismatch {
                images: features.rows(),
                labels: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: num_classes,
            });
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows `indices` as a feature batch plus labels.
    pub fn batch(&self, indices: &[usize]) -> (Mat, Vec<usize>) {
        let x = self.features.select_rows(indices);
        let y = indices.iter().map(|&i| self.labels[i]).collect();
        (x, y)
    }

    /// New dataset made of rows `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!(
                "index {bad} out of range for {} examples",
                self.len()
            )));
        }
        let (x, y) = self.batch(indices);
        Dataset::new(x, y, self.num_classes)
    }

    /// First `n` examples and the rest.
    pub fn split_at(&self, n: usize) -> Result<(Dataset, Dataset)> {
        if n == 0 || n >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "split point {n} must lie strictly inside 0..{}",
                self.len()
            )));
        }
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        Ok((self.select(&head)?, self.select(&tail)?))
    }

    /// Training part and a validation part made of the last `n_val` examples.
    pub fn validation_split(&self, n_val: usize) -> Result<(Dataset, Dataset)> {
        if n_val >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "validation size {n_val} leaves no training data out of {}",
                self.len()
            )));
        }
        self.split_at(self.len() - n_val)
    }
}

/// Indices of `n` distinct examples drawn without replacement.
pub fn subsample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > len {
        return Err(Error::InvalidArgument(format!("cannot draw {n} examples from {len}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..len).collect();
    idx.partial_shuffle(&mut rng, n);
    idx.truncate(n);
    Ok(idx)
}

/// `n` examples drawn without replacement, deterministic per seed.
pub fn subsample(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    ds.select(&subsample_indices(ds.len(), n, seed)?)
}
