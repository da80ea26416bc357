use std::path::{Path, PathBuf};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fsutil::{read_maybe_gzip, write_atomic};
use crate::linalg::Mat;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            expected: at + 4,
            actual: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    bytes.get(header..header + len).ok_or_else(|| Error::Truncated {
        path: path.to_path_buf(),
        expected: header + len,
        actual: bytes.len(),
    })
}

/// Parses an IDX image file and its label file. Pixels are scaled by 1/255
/// and each image is flattened row-major; the class count is the largest
/// label plus one. Gzip-compressed files are accepted.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img = read_maybe_gzip(images_path)?;
    check_magic(&img, IMAGES_MAGIC, images_path)?;
    let count = be_u32(&img, 4, images_path)? as usize;
    let rows = be_u32(&img, 8, images_path)? as usize;
    let cols = be_u32(&img, 12, images_path)? as usize;
    let d = rows * cols;
    let pixels = payload(&img, 16, count * d, images_path)?;

    let lab = read_maybe_gzip(labels_path)?;
    check_magic(&lab, LABELS_MAGIC, labels_path)?;
    let n_labels = be_u32(&lab, 4, labels_path)? as usize;
    if n_labels != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: n_labels,
        });
    }
    let labels: Vec<usize> = payload(&lab, 8, n_labels, labels_path)?
        .iter()
        .map(|&b| b as usize)
        .collect();
    if count == 0 || d == 0 {
        return Err(Error::EmptyDataset);
    }

    let features = Mat::from_vec(count, d, pixels.iter().map(|&p| f64::from(p) / 255.0).collect())?;
    let classes = labels.iter().max().map_or(1, |&m| m + 1);
    Dataset::new(features, labels, classes)
}

/// Writes `ds` as an IDX image file (`rows × cols` per image) and label file.
/// Feature values are mapped back to bytes by `round(255·v)`.
pub fn write_idx(ds: &Dataset, images_path: &Path, labels_path: &Path, rows: usize, cols: usize) -> Result<()> {
    if rows * cols != ds.dim() {
        return Err(Error::InvalidShape(format!(
            "{rows}x{cols} images do not hold {} features",
            ds.dim()
        )));
    }
    if ds.num_classes() > 256 {
        return Err(Error::InvalidArgument("IDX labels are single bytes".into()));
    }
    let mut img = Vec::with_capacity(16 + ds.len() * ds.dim());
    for v in [IMAGES_MAGIC, ds.len() as u32, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(
        ds.features()
            .as_slice()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    let mut lab = Vec::with_capacity(8 + ds.len());
    for v in [LABELS_MAGIC, ds.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend(ds.labels().iter().map(|&y| y as u8));
    write_atomic(images_path, &img)?;
    write_atomic(labels_path, &lab)
}

/// The official MNIST train and test sets.
#[derive(Debug, Clone)]
pub struct MnistSplit {
    pub train: Dataset,
    pub test: Dataset,
}

fn find(dir: &Path, stem: &str) -> PathBuf {
    let plain = dir.join(stem);
    if plain.exists() {
        return plain;
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        gz
    } else {
        plain
    }
}

/// Loads the four standard MNIST files (optionally `.gz`) from `dir`.
pub fn load_mnist(dir: &Path) -> Result<MnistSplit> {
    let train = load_idx(
        &find(dir, "train-images-idx3-ubyte"),
        &find(dir, "train-labels-idx1-ubyte"),
    )?;
    let test = load_idx(
        &find(dir, "t10k-images-idx3-ubyte"),
        &find(dir, "t10k-labels-idx1-ubyte"),
    )?;
    Ok(MnistSplit { train, test })
}
