use serde::{Deserialize, Serialize};

use crate::compress::CompressedModel;
use crate::error::{Error, Result};
use crate::nn::Mlp;

/// One entry of an architecture descriptor. Convolutions carry their output
/// spatial size so FLOPs can be counted without running anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArchLayer {
    /// `m × n` weight.
    Dense {
        m: usize,
        n: usize,
    },
    LowRankDense {
        m: usize,
        n: usize,
        r: usize,
    },
    /// `fh × fw × fd × out` kernel producing an `h_out × w_out` map.
    Conv {
        fh: usize,
        fw: usize,
        fd: usize,
        out: usize,
        h_out: usize,
        w_out: usize,
    },
    LowRankConv {
        fh: usize,
        fw: usize,
        fd: usize,
        out: usize,
        h_out: usize,
        w_out: usize,
        r: usize,
    },
    /// Learnable scale and shift per channel.
    BatchNorm {
        channels: usize,
    },
    Bias {
        n: usize,
    },
}

impl ArchLayer {
    fn validate(&self) -> Result<()> {
        let dims_ok = match *self {
            ArchLayer::Dense { m, n } => m > 0 && n > 0,
            ArchLayer::LowRankDense { m, n, r } => m > 0 && n > 0 && r > 0 && r <= m.min(n),
            ArchLayer::Conv {
                fh,
                fw,
                fd,
                out,
                h_out,
                w_out,
            } => [fh, fw, fd, out, h_out, w_out].iter().all(|&d| d > 0),
            ArchLayer::LowRankConv {
                fh,
                fw,
                fd,
                out,
                h_out,
                w_out,
                r,
            } => [fh, fw, fd, out, h_out, w_out].iter().all(|&d| d > 0) && r > 0 && r <= (fh * fw * fd).min(out),
            ArchLayer::BatchNorm { channels } => channels > 0,
            ArchLayer::Bias { n } => n > 0,
        };
        if dims_ok {
            Ok(())
        } else {
            Err(Error::InvalidShape(format!("bad layer {self:?}")))
        }
    }

    pub fn params(&self) -> u64 {
        match *self {
            ArchLayer::Dense { m, n } => (m * n) as u64,
            ArchLayer::LowRankDense { m, n, r } => ((m + n) * r) as u64,
            ArchLayer::Conv { fh, fw, fd, out, .. } => (fh * fw * fd * out) as u64,
            ArchLayer::LowRankConv { fh, fw, fd, out, r, .. } => (fh * fw * fd * r + out * r) as u64,
            ArchLayer::BatchNorm { channels } => 2 * channels as u64,
            ArchLayer::Bias { n } => n as u64,
        }
    }

    /// Multiply–accumulates per sample.
    pub fn macs(&self) -> u64 {
        match *self {
            ArchLayer::Dense { .. } | ArchLayer::LowRankDense { .. } => self.params(),
            ArchLayer::Conv { h_out, w_out, .. } | ArchLayer::LowRankConv { h_out, w_out, .. } => {
                self.params() * (h_out * w_out) as u64
            }
            ArchLayer::BatchNorm { .. } | ArchLayer::Bias { .. } => 0,
        }
    }

    /// Channels (or features) this layer produces, for chain checks.
    fn output_width(&self) -> usize {
        match *self {
            ArchLayer::Dense { m, .. } | ArchLayer::LowRankDense { m, .. } => m,
            ArchLayer::Conv { out, .. } | ArchLayer::LowRankConv { out, .. } => out,
            ArchLayer::BatchNorm { channels } => channels,
            ArchLayer::Bias { n } => n,
        }
    }

    fn input_width(&self) -> usize {
        match *self {
            ArchLayer::Dense { n, .. } | ArchLayer::LowRankDense { n, .. } => n,
            ArchLayer::Conv { fd, .. } | ArchLayer::LowRankConv { fd, .. } => fd,
            ArchLayer::BatchNorm { channels } => channels,
            ArchLayer::Bias { n } => n,
        }
    }

    fn is_dense(&self) -> bool {
        matches!(self, ArchLayer::Dense { .. } | ArchLayer::LowRankDense { .. })
    }
}

/// Named list of layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    name: String,
    layers: Vec<ArchLayer>,
}

impl ArchDescriptor {
    /// Per-layer checks only; suits architectures with branches.
    pub fn new(name: impl Into<String>, layers: Vec<ArchLayer>) -> Result<Self> {
        for l in &layers {
            l.validate()?;
        }
        Ok(Self {
            name: name.into(),
            layers,
        })
    }

    /// Also checks that each layer consumes what the previous one produces.
    /// A dense layer after a convolution may read either the pooled channels
    /// or the flattened map.
    pub fn sequential(name: impl Into<String>, layers: Vec<ArchLayer>) -> Result<Self> {
        let arch = Self::new(name, layers)?;
        for (i, pair) in arch.layers.windows(2).enumerate() {
            let (prev, next) = (pair[0], pair[1]);
            let produced = prev.output_width();
            let ok = match (prev, next.is_dense()) {
                (ArchLayer::Conv { h_out, w_out, .. } | ArchLayer::LowRankConv { h_out, w_out, .. }, true) => {
                    next.input_width() == produced || next.input_width() == produced * h_out * w_out
                }
                _ => next.input_width() == produced,
            };
            if !ok {
                return Err(Error::InvalidShape(format!(
                    "layer {} reads {} features but layer {i} produces {produced}",
                    i + 1,
                    next.input_width()
                )));
            }
        }
        Ok(arch)
    }

    /// Collapsed dense layers of a factorized network.
    pub fn from_mlp(model: &Mlp) -> Self {
        let layers = model
            .layers()
            .iter()
            .map(|l| ArchLayer::Dense {
                m: l.out_dim(),
                n: l.in_dim(),
            })
            .collect();
        Self {
            name: "mlp".into(),
            layers,
        }
    }

    /// Rank-`r` pairs, or the dense product where that is cheaper.
    pub fn from_compressed(model: &CompressedModel) -> Self {
        let layers = model
            .shapes()
            .into_iter()
            .zip(model.ranks())
            .map(|((m, n), r)| {
                if (m + n) * r < m * n {
                    ArchLayer::LowRankDense { m, n, r }
                } else {
                    ArchLayer::Dense { m, n }
                }
            })
            .collect();
        Self {
            name: "compressed-mlp".into(),
            layers,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[ArchLayer] {
        &self.layers
    }
}

pub fn count_params(arch: &ArchDescriptor) -> u64 {
    arch.layers.iter().map(ArchLayer::params).sum()
}

/// Per-sample multiply–accumulate count of the weight layers. This is the
/// convention behind the published ResNet20/VGG16 figures, so one FLOP here
/// is one MAC.
pub fn count_flops(arch: &ArchDescriptor) -> u64 {
    arch.layers.iter().map(ArchLayer::macs).sum()
}

fn conv3(fd: usize, out: usize, hw: usize) -> ArchLayer {
    ArchLayer::Conv {
        fh: 3,
        fw: 3,
        fd,
        out,
        h_out: hw,
        w_out: hw,
    }
}

/// CIFAR ResNet20: three stages of three basic blocks (16/32/64 channels on
/// 32/16/8 maps), 1×1 projection shortcuts where the shape changes, batch
/// norm after every convolution, and a 64→10 classifier with bias.
pub fn resnet20() -> ArchDescriptor {
    let mut layers = vec![conv3(3, 16, 32), ArchLayer::BatchNorm { channels: 16 }];
    let mut in_ch = 16;
    for (ch, hw) in [(16, 32), (32, 16), (64, 8)] {
        for _ in 0..3 {
            layers.push(conv3(in_ch, ch, hw));
            layers.push(ArchLayer::BatchNorm { channels: ch });
            layers.push(conv3(ch, ch, hw));
            layers.push(ArchLayer::BatchNorm { channels: ch });
            if in_ch != ch {
                layers.push(ArchLayer::Conv {
                    fh: 1,
                    fw: 1,
                    fd: in_ch,
                    out: ch,
                    h_out: hw,
                    w_out: hw,
                });
                layers.push(ArchLayer::BatchNorm { channels: ch });
            }
            in_ch = ch;
        }
    }
    layers.push(ArchLayer::Dense { m: 10, n: 64 });
    layers.push(ArchLayer::Bias { n: 10 });
    ArchDescriptor::new("resnet20", layers).expect("static descriptor")
}

/// CIFAR VGG16: thirteen 3×3 convolutions with bias and batch norm, five
/// 2×2 poolings, and a 512→10 classifier with bias.
pub fn vgg16() -> ArchDescriptor {
    let plan: [&[usize]; 5] = [
        &[64, 64],
        &[128, 128],
        &[256, 256, 256],
        &[512, 512, 512],
        &[512, 512, 512],
    ];
    let mut layers = Vec::new();
    let mut in_ch = 3;
    let mut hw = 32;
    for stage in plan {
        for &ch in stage {
            layers.push(conv3(in_ch, ch, hw));
            layers.push(ArchLayer::Bias { n: ch });
            layers.push(ArchLayer::BatchNorm { channels: ch });
            in_ch = ch;
        }
        hw /= 2;
    }
    layers.push(ArchLayer::Dense { m: 10, n: 512 });
    layers.push(ArchLayer::Bias { n: 10 });
    ArchDescriptor::sequential("vgg16", layers).expect("static descriptor")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(layer: ArchLayer) -> ArchDescriptor {
        ArchDescriptor::new("t", vec![layer]).unwrap()
    }

    #[test]
    fn dense_counts() {
        let a = one(ArchLayer::Dense { m: 96, n: 96 });
        assert_eq!(count_params(&a), 9216);
        assert_eq!(count_flops(&a), 9216);
        assert_eq!(
            count_params(&one(ArchLayer::LowRankDense { m: 96, n: 96, r: 10 })),
            1920
        );
    }

    #[test]
    fn conv_counts() {
        let c = one(ArchLayer::Conv {
            fh: 3,
            fw: 3,
            fd: 4,
            out: 8,
            h_out: 5,
            w_out: 6,
        });
        assert_eq!(count_params(&c), 288);
        assert_eq!(count_flops(&c), 288 * 30);
        let lr = one(ArchLayer::LowRankConv {
            fh: 3,
            fw: 3,
            fd: 4,
            out: 8,
            h_out: 5,
            w_out: 6,
            r: 2,
        });
        assert_eq!(count_params(&lr), 36 * 2 + 16);
        assert_eq!(count_flops(&lr), (36 * 2 + 16) * 30);
    }

    #[test]
    fn lowrank_is_cheaper_exactly_below_the_break_even_rank() {
        for (m, n) in [(96, 96), (10, 784), (7, 3), (12, 12)] {
            for r in 1..=m.min(n) {
                let dense = count_params(&one(ArchLayer::Dense { m, n }));
                let low = count_params(&one(ArchLayer::LowRankDense { m, n, r }));
                assert_eq!(low < dense, r * (m + n) < m * n, "m={m} n={n} r={r}");
            }
        }
    }

    #[test]
    fn rejects_bad_layers_and_chains() {
        assert!(ArchDescriptor::new("t", vec![ArchLayer::LowRankDense { m: 4, n: 3, r: 4 }]).is_err());
        assert!(ArchDescriptor::new("t", vec![ArchLayer::Dense { m: 0, n: 3 }]).is_err());
        let chain = vec![ArchLayer::Dense { m: 4, n: 3 }, ArchLayer::Dense { m: 2, n: 5 }];
        assert!(ArchDescriptor::sequential("t", chain).is_err());
        let chain = vec![ArchLayer::Dense { m: 4, n: 3 }, ArchLayer::Dense { m: 2, n: 4 }];
        assert!(ArchDescriptor::sequential("t", chain).is_ok());
    }

    #[test]
    fn resnet20_matches_published_size() {
        let a = resnet20();
        let params = count_params(&a) as f64;
        let flops = count_flops(&a) as f64;
        assert!((params / 0.27e6 - 1.0).abs() <= 0.03, "{params}");
        assert!((flops / 40.81e6 - 1.0).abs() <= 0.10, "{flops}");
        // 19 3×3 convolutions, two projections, one classifier.
        let convs = a
            .layers()
            .iter()
            .filter(|l| matches!(l, ArchLayer::Conv { .. }))
            .count();
        assert_eq!(convs, 21);
    }

    #[test]
    fn vgg16_matches_published_size() {
        let a = vgg16();
        let params = count_params(&a) as f64;
        let flops = count_flops(&a) as f64;
        assert!((params / 14.73e6 - 1.0).abs() <= 0.03, "{params}");
        assert!((flops / 314.59e6 - 1.0).abs() <= 0.10, "{flops}");
    }

    #[test]
    fn mlp_descriptor_counts_collapsed_weights() {
        let m = Mlp::init(&[784, 96, 10], 3, 0).unwrap();
        let a = ArchDescriptor::from_mlp(&m);
        assert_eq!(count_params(&a), 784 * 96 + 96 * 10);
    }
}
