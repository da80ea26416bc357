//! Binary checkpoints.
//!
//! Layout: the line `LORITA-CHECKPOINT 1`, the line `header-bytes <n>`, `n`
//! bytes of JSON header, then every tensor as little-endian `f64`s in header
//! order. The header lists each tensor's name, shape and element offset.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::compress::CompressedModel;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::linalg::Mat;
use crate::nn::{FactorizedDense, Mlp};

const MAGIC: &str = "LORITA-CHECKPOINT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointKind {
    /// Trained factors, one list per layer.
    Factorized,
    /// One dense weight per layer.
    Collapsed,
    /// One `(A, B)` pair per layer.
    Compressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    kind: CheckpointKind,
    dims: Vec<usize>,
    depth: usize,
    seed: u64,
    metadata: Map<String, Value>,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    pub seed: u64,
    /// Free-form run information (training config, scores, plan).
    pub metadata: Map<String, Value>,
    model: Mlp,
}

impl Checkpoint {
    pub fn factorized(model: Mlp, seed: u64) -> Self {
        Self {
            kind: CheckpointKind::Factorized,
            seed,
            metadata: Map::new(),
            model,
        }
    }

    pub fn collapsed(model: &Mlp, seed: u64) -> Self {
        Self {
            kind: CheckpointKind::Collapsed,
            seed,
            metadata: Map::new(),
            model: model.collapsed(),
        }
    }

    pub fn compressed(model: CompressedModel, seed: u64) -> Self {
        Self {
            kind: CheckpointKind::Compressed,
            seed,
            metadata: Map::new(),
            model: model.into_mlp(),
        }
    }

    pub fn with_metadata(mut self, key: &str, value: Value) -> Self {
        self.metadata.insert(key.to_string(), value);
        self
    }

    /// The stored network. Compressed checkpoints hold two-factor layers.
    pub fn model(&self) -> &Mlp {
        &self.model
    }

    pub fn into_model(self) -> Mlp {
        self.model
    }

    pub fn compressed_model(&self) -> Result<CompressedModel> {
        if self.kind != CheckpointKind::Compressed {
            return Err(Error::Checkpoint(format!(
                "{:?} checkpoint is not compressed",
                self.kind
            )));
        }
        CompressedModel::from_mlp(self.model.clone())
    }

    fn tensor_name(&self, layer: usize, k: usize) -> String {
        match self.kind {
            CheckpointKind::Compressed => format!("layer{layer}.{}", if k == 0 { "a" } else { "b" }),
            _ => format!("layer{layer}.factor{k}"),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut tensors = Vec::new();
        let mut offset = 0;
        for (l, layer) in self.model.layers().iter().enumerate() {
            for (k, f) in layer.factors().iter().enumerate() {
                tensors.push(TensorEntry {
                    name: self.tensor_name(l, k),
                    shape: [f.rows(), f.cols()],
                    offset,
                });
                offset += f.len();
            }
        }
        let header = Header {
            version: FORMAT_VERSION,
            kind: self.kind,
            dims: self.model.dims(),
            depth: self.model.layers()[0].depth(),
            seed: self.seed,
            metadata: self.metadata.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = format!("{MAGIC} {FORMAT_VERSION}\nheader-bytes {}\n", json.len()).into_bytes();
        out.extend_from_slice(&json);
        out.reserve(offset * 8);
        for f in self.model.params() {
            for v in f.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let (first, rest) = split_line(bytes).ok_or_else(|| bad("missing format line".into()))?;
        let version = first
            .strip_prefix(MAGIC)
            .and_then(|s| s.strip_prefix(' '))
            .ok_or_else(|| bad(format!("not a checkpoint (first line {first:?})")))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let (second, rest) = split_line(rest).ok_or_else(|| bad("missing header length".into()))?;
        let n: usize = second
            .strip_prefix("header-bytes ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad header length line {second:?}")))?;
        if rest.len() < n {
            return Err(bad("header truncated".into()));
        }
        let header: Header = serde_json::from_slice(&rest[..n]).map_err(|e| bad(format!("bad header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(bad(format!("header version {} does not match", header.version)));
        }
        let blob = &rest[n..];
        let total: usize = header.tensors.iter().map(|t| t.shape[0] * t.shape[1]).sum();
        if blob.len() != total * 8 {
            return Err(bad(format!(
                "blob has {} bytes, header declares {}",
                blob.len(),
                total * 8
            )));
        }

        let mut layers: Vec<Vec<Mat>> = Vec::new();
        let mut expect_offset = 0;
        for t in &header.tensors {
            if t.offset != expect_offset {
                return Err(bad(format!(
                    "tensor {} at offset {} but expected {expect_offset}",
                    t.name, t.offset
                )));
            }
            let (l, k) =
                parse_name(&t.name, header.kind).ok_or_else(|| bad(format!("bad tensor name {:?}", t.name)))?;
            if l != layers.len() && l + 1 != layers.len() || (l == layers.len() && k != 0) {
                return Err(bad(format!("tensor {} out of order", t.name)));
            }
            if l == layers.len() {
                layers.push(Vec::new());
            }
            if k != layers[l].len() {
                return Err(bad(format!("tensor {} out of order", t.name)));
            }
            let len = t.shape[0] * t.shape[1];
            let data = blob[expect_offset * 8..(expect_offset + len) * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            layers[l].push(Mat::from_vec(t.shape[0], t.shape[1], data)?);
            expect_offset += len;
        }
        let layers = layers
            .into_iter()
            .map(FactorizedDense::new)
            .collect::<Result<Vec<_>>>()?;
        if layers.is_empty() {
            return Err(bad("checkpoint holds no layers".into()));
        }
        let model = Mlp::new(layers)?;
        if model.dims() != header.dims {
            return Err(bad(format!(
                "tensors give dims {:?}, header says {:?}",
                model.dims(),
                header.dims
            )));
        }
        let per_layer_ok = model.layers().iter().all(|l| match header.kind {
            CheckpointKind::Collapsed => l.depth() == 1,
            CheckpointKind::Compressed => l.depth() == 2,
            CheckpointKind::Factorized => true,
        });
        if !per_layer_ok {
            return Err(bad(format!("layer depths do not fit a {:?} checkpoint", header.kind)));
        }
        Ok(Self {
            kind: header.kind,
            seed: header.seed,
            metadata: header.metadata,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn split_line(bytes: &[u8]) -> Option<(&str, &[u8])> {
    let pos = bytes.iter().take(256).position(|&b| b == b'\n')?;
    Some((std::str::from_utf8(&bytes[..pos]).ok()?, &bytes[pos + 1..]))
}

fn parse_name(name: &str, kind: CheckpointKind) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("layer")?;
    let (l, part) = rest.split_once('.')?;
    let l = l.parse().ok()?;
    let k = match (kind, part) {
        (CheckpointKind::Compressed, "a") => 0,
        (CheckpointKind::Compressed, "b") => 1,
        (CheckpointKind::Compressed, _) => return None,
        (_, p) => p.strip_prefix("factor")?.parse().ok()?,
    };
    Some((l, k))
}
