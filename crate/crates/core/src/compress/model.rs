use crate::compress::plan::{CompressionPlan, Decomposition};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{truncate, Mat};
use crate::nn::{FactorizedDense, Mlp};
use crate::optim::{train, Optimizer, TrainConfig, TrainReport};

/// Network whose layers are rank-`r_l` pairs `W_l ≈ A_l·B_l`
/// (`A_l: m_l × r_l`, `B_l: r_l × n_l`), evaluated as `h ↦ A_l(B_l h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedModel {
    net: Mlp,
}

impl CompressedModel {
    pub fn from_pairs(pairs: Vec<(Mat, Mat)>) -> Result<Self> {
        let layers = pairs
            .into_iter()
            .map(|(a, b)| FactorizedDense::new(vec![a, b]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { net: Mlp::new(layers)? })
    }

    /// Wraps a network whose every layer is a two-factor pair.
    pub fn from_mlp(net: Mlp) -> Result<Self> {
        if net.layers().iter().any(|l| l.depth() != 2) {
            return Err(Error::InvalidShape(
                "every compressed layer needs exactly two factors".into(),
            ));
        }
        Ok(Self { net })
    }

    pub fn as_mlp(&self) -> &Mlp {
        &self.net
    }

    pub fn into_mlp(self) -> Mlp {
        self.net
    }

    pub fn num_layers(&self) -> usize {
        self.net.num_layers()
    }

    /// `(A_l, B_l)` of layer `l`.
    pub fn pair(&self, l: usize) -> (&Mat, &Mat) {
        let f = self.net.layers()[l].factors();
        (&f[0], &f[1])
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.net.layers().iter().map(|l| l.factors()[1].rows()).collect()
    }

    /// `(m_l, n_l)` of each layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.net.layers().iter().map(|l| (l.out_dim(), l.in_dim())).collect()
    }

    /// `Σ (m_l + n_l)·r_l`, the size of the stored pairs.
    pub fn stored_params(&self) -> usize {
        self.net.param_count()
    }

    /// Parameters at deployment: a layer is kept as a pair only when that
    /// is smaller than its dense weight, `Σ min(m_l n_l, (m_l + n_l) r_l)`.
    pub fn deployed_params(&self) -> usize {
        self.shapes()
            .iter()
            .zip(self.ranks())
            .map(|(&(m, n), r)| (m * n).min((m + n) * r))
            .sum()
    }

    /// `Σ m_l n_l` of the uncompressed architecture.
    pub fn dense_params(&self) -> usize {
        self.shapes().iter().map(|(m, n)| m * n).sum()
    }

    pub fn logits(&self, x: &Mat) -> Result<Mat> {
        self.net.logits(x)
    }
}

/// Truncates every collapsed layer to its planned rank.
pub fn apply_plan(dec: &Decomposition, plan: &CompressionPlan) -> Result<CompressedModel> {
    if plan.ranks().len() != dec.num_layers() {
        return Err(Error::InvalidShape(format!(
            "plan has {} ranks for {} layers",
            plan.ranks().len(),
            dec.num_layers()
        )));
    }
    let pairs = dec
        .layers()
        .iter()
        .zip(plan.ranks())
        .enumerate()
        .map(|(l, (s, &r))| {
            truncate(s, r).map_err(|e| match e {
                Error::RankOutOfRange { rank, max, .. } => Error::RankOutOfRange {
                    layer: Some(l),
                    rank,
                    max,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CompressedModel::from_pairs(pairs)
}

/// One round of SGD on the pairs `(A_l, B_l)` with their shapes fixed.
/// Returns the model unchanged (and no report) when `cfg.epochs == 0`.
pub fn finetune(
    cm: &CompressedModel,
    ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<(CompressedModel, Option<TrainReport>)> {
    if cfg.epochs == 0 {
        return Ok((cm.clone(), None));
    }
    if cfg.optimizer != Optimizer::Sgd {
        return Err(Error::InvalidArgument("fine-tuning runs plain SGD".into()));
    }
    let mut net = cm.net.clone();
    let report = train(&mut net, ds, cfg)?;
    Ok((CompressedModel { net }, Some(report)))
}
