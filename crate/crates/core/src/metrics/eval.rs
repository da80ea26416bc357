use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::{apply_plan, gsvt, lsvt, retained_sv_fraction, CompressedModel, Decomposition, RankRule, Scheme};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::metrics::arch::{count_flops, ArchDescriptor};
use crate::nn::Mlp;
use crate::optim::argmax;

const EVAL_CHUNK: usize = 1000;

/// Anything that maps a batch of rows to class scores.
pub trait Classifier {
    fn logits(&self, x: &Mat) -> Result<Mat>;
    fn num_outputs(&self) -> usize;
}

impl Classifier for Mlp {
    fn logits(&self, x: &Mat) -> Result<Mat> {
        Mlp::logits(self, x)
    }

    fn num_outputs(&self) -> usize {
        self.out_dim()
    }
}

impl Classifier for CompressedModel {
    fn logits(&self, x: &Mat) -> Result<Mat> {
        CompressedModel::logits(self, x)
    }

    fn num_outputs(&self) -> usize {
        self.as_mlp().out_dim()
    }
}

/// Top-1 accuracy; ties go to the lowest class index.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, ds: &Dataset) -> Result<f64> {
    if ds.num_classes() > model.num_outputs() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} classes but the model scores {}",
            ds.num_classes(),
            model.num_outputs()
        )));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = ds.batch(chunk);
        let logits = model.logits(&x)?;
        correct += y
            .iter()
            .enumerate()
            .filter(|&(i, &label)| argmax(logits.row(i)) == label)
            .count();
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// One point of an accuracy-versus-retained-singular-values curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// The scheme's knob: kept fraction per layer (LSVT) or of the pooled
    /// spectrum (GSVT).
    pub retained_fraction: f64,
    /// Mean over layers of `r_l / k_l` for the resulting plan.
    pub mean_layer_fraction: f64,
    pub test_accuracy: f64,
    /// Accuracy of the untruncated model minus `test_accuracy`.
    pub accuracy_drop: f64,
    pub retained_params: u64,
    pub flops: u64,
}

/// Truncates `model` at each fraction and evaluates on `ds`. Points are
/// computed in parallel and returned in input order.
pub fn sweep_curve(model: &Mlp, ds: &Dataset, scheme: Scheme, fractions: &[f64]) -> Result<Vec<CurvePoint>> {
    if fractions.is_empty() {
        return Err(Error::InvalidArgument("no fractions to sweep".into()));
    }
    if fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidArgument("fractions must lie in (0, 1]".into()));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("fractions must be strictly ascending".into()));
    }
    let dec = Decomposition::of(model)?;
    let full = dec.full_ranks();
    let baseline = evaluate(model, ds)?;
    fractions
        .par_iter()
        .map(|&f| {
            let plan = match scheme {
                Scheme::Lsvt => lsvt(&dec, RankRule::Fraction(f))?,
                Scheme::Gsvt => gsvt(&dec, f)?,
                Scheme::Isvt => {
                    return Err(Error::InvalidArgument(
                        "ISVT is driven by a parameter budget, not a fraction".into(),
                    ))
                }
            };
            let compressed = apply_plan(&dec, &plan)?;
            // Keeping every singular value is no truncation at all; score the
            // original so rounding in U·S·Vᵀ cannot flip a near-tie.
            let acc = if plan.ranks() == full.as_slice() {
                baseline
            } else {
                evaluate(&compressed, ds)?
            };
            let arch = ArchDescriptor::from_compressed(&compressed);
            Ok(CurvePoint {
                retained_fraction: f,
                mean_layer_fraction: retained_sv_fraction(&plan, &dec)?,
                test_accuracy: acc,
                accuracy_drop: baseline - acc,
                retained_params: compressed.deployed_params() as u64,
                flops: count_flops(&arch),
            })
        })
        .collect()
}

/// CSV with columns `retained_fraction,mean_layer_fraction,test_accuracy,
/// accuracy_drop,retained_params,flops`.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
