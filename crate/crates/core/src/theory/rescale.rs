use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::optim::evaluate_dataset;

/// Per-layer penalty strengths `α_l` for a depth-`K` factorized network,
/// with the single strength `λ` and the per-layer factor scales `β_l` that
/// map one problem onto the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescalingSpec {
    alphas: Vec<f64>,
    depth: usize,
    p: f64,
}

impl RescalingSpec {
    /// Uses `p = 2/K`, the Schatten exponent a depth-`K` Frobenius
    /// factorization induces.
    pub fn new(alphas: Vec<f64>, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("factor depth must be at least 1".into()));
        }
        Self::with_p(alphas, depth, 2.0 / depth as f64)
    }

    pub fn with_p(alphas: Vec<f64>, depth: usize, p: f64) -> Result<Self> {
        if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidArgument(
                "α must be a non-empty list of positive reals".into(),
            ));
        }
        if depth == 0 || !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad depth {depth} or p {p}")));
        }
        Ok(Self { alphas, depth, p })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `λ = (p/2)(∏ α_l)^{1/L}`, computed through logs.
    pub fn lambda(&self) -> f64 {
        let mean_log = self.alphas.iter().map(|a| a.ln()).sum::<f64>() / self.alphas.len() as f64;
        0.5 * self.p * mean_log.exp()
    }

    /// `β_l = sqrt(α_l p / (2λ))`; their product is 1.
    pub fn betas(&self) -> Vec<f64> {
        let lambda = self.lambda();
        self.alphas
            .iter()
            .map(|a| (a * self.p / (2.0 * lambda)).sqrt())
            .collect()
    }

    /// `Σ_l (α_l p / 2) Σ_k ‖Wᵏ_l‖_F²`.
    pub fn multi_penalty(&self, model: &Mlp) -> Result<f64> {
        self.check(model)?;
        Ok(model
            .layers()
            .iter()
            .zip(&self.alphas)
            .map(|(l, a)| 0.5 * a * self.p * l.sum_squares())
            .sum())
    }

    fn check(&self, model: &Mlp) -> Result<()> {
        if model.num_layers() != self.alphas.len() {
            return Err(Error::InvalidArgument(format!(
                "{} penalty strengths for a {}-layer network",
                self.alphas.len(),
                model.num_layers()
            )));
        }
        Ok(())
    }
}

/// Multiplies every factor of layer `l` by `β_l`.
///
/// Each collapsed layer therefore scales by `β_lᴷ`, and the network output
/// by `∏ β_lᴷ = 1`.
pub fn rescale_network(model: &Mlp, spec: &RescalingSpec) -> Result<Mlp> {
    spec.check(model)?;
    rescale_by(model, &spec.betas())
}

/// Multiplies every factor of layer `l` by `betas[l]`, with no check that
/// the product is 1.
pub fn rescale_by(model: &Mlp, betas: &[f64]) -> Result<Mlp> {
    if betas.len() != model.num_layers() {
        return Err(Error::InvalidArgument(format!(
            "{} scales for a {}-layer network",
            betas.len(),
            model.num_layers()
        )));
    }
    let mut out = model.clone();
    for (layer, &b) in out.layers_mut().iter_mut().zip(betas) {
        layer.scale_factors(b);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop2Report {
    pub lambda: f64,
    pub betas: Vec<f64>,
    pub max_output_diff: f64,
    pub argmax_preserved: bool,
    /// Multi-strength objective at the original weights.
    pub multi_objective: f64,
    /// Single-strength objective at the rescaled weights.
    pub single_objective: f64,
    pub objective_rel_diff: f64,
    pub outputs_ok: bool,
    pub objectives_ok: bool,
    pub pass: bool,
}

pub const OUTPUT_TOL: f64 = 1e-9;
pub const OBJECTIVE_TOL: f64 = 1e-10;

/// Rescales `model` by `spec` and compares outputs and objectives on `ds`.
pub fn verify_prop2(model: &Mlp, spec: &RescalingSpec, ds: &Dataset) -> Result<Prop2Report> {
    let rescaled = rescale_network(model, spec)?;
    verify_against(model, &rescaled, spec, ds)
}

/// Same comparison against an arbitrary second network; used to check that
/// a broken rescaling is caught.
pub fn verify_against(model: &Mlp, rescaled: &Mlp, spec: &RescalingSpec, ds: &Dataset) -> Result<Prop2Report> {
    let x = ds.features();
    let before = model.logits(x)?;
    let after = rescaled.logits(x)?;
    let max_output_diff = before.max_abs_diff(&after);
    let argmax_preserved =
        (0..before.rows()).all(|i| crate::optim::argmax(before.row(i)) == crate::optim::argmax(after.row(i)));

    let lambda = spec.lambda();
    let multi_objective = evaluate_dataset(model, ds)?.loss + spec.multi_penalty(model)?;
    let single_objective = evaluate_dataset(rescaled, ds)?.loss + lambda * rescaled.penalty();
    let objective_rel_diff = (multi_objective - single_objective).abs() / multi_objective.abs().max(f64::MIN_POSITIVE);
    let outputs_ok = max_output_diff <= OUTPUT_TOL;
    let objectives_ok = objective_rel_diff <= OBJECTIVE_TOL;
    Ok(Prop2Report {
        lambda,
        betas: spec.betas(),
        max_output_diff,
        argmax_preserved,
        multi_objective,
        single_objective,
        objective_rel_diff,
        outputs_ok,
        objectives_ok,
        pass: outputs_ok && objectives_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, d: usize, classes: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Mat::random_normal(n, d, 1.0, &mut rng);
        let y = (0..n).map(|_| rng.random_range(0..classes)).collect();
        Dataset::new(x, y, classes).unwrap()
    }

    #[test]
    fn closed_form_lambda_and_betas() {
        let spec = RescalingSpec::with_p(vec![2.0, 8.0], 2, 1.0).unwrap();
        assert!((spec.lambda() - 2.0).abs() <= 1e-15);
        let b = spec.betas();
        assert!((b[0] - 0.5f64.sqrt()).abs() <= 1e-15);
        assert!((b[1] - 2f64.sqrt()).abs() <= 1e-15);
    }

    #[test]
    fn betas_multiply_to_one() {
        let spec = RescalingSpec::new(vec![1e-3, 4.0, 16.0, 0.7], 4).unwrap();
        let prod: f64 = spec.betas().iter().product();
        assert!((prod - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn equal_alphas_leave_model_unchanged() {
        let m = Mlp::init(&[5, 4, 3], 2, 1).unwrap();
        let spec = RescalingSpec::new(vec![3.0, 3.0], 2).unwrap();
        let r = rescale_network(&m, &spec).unwrap();
        for (a, b) in m.params().zip(r.params()) {
            assert!(a.max_abs_diff(b) <= 1e-15);
        }
        let rep = verify_prop2(&m, &spec, &random_data(20, 5, 3, 0)).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn three_layer_depth_two() {
        let m = Mlp::init(&[8, 6, 6, 4], 2, 3).unwrap();
        let spec = RescalingSpec::new(vec![1.0, 4.0, 16.0], 2).unwrap();
        let rep = verify_prop2(&m, &spec, &random_data(100, 8, 4, 1)).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.argmax_preserved);
    }

    #[test]
    fn opposite_scales_preserve_outputs() {
        // β = (2, 1/2) at K = 1.
        let m = Mlp::init(&[5, 7, 3], 1, 4).unwrap();
        let r = rescale_by(&m, &[2.0, 0.5]).unwrap();
        let x = random_data(30, 5, 3, 2);
        let diff = m
            .logits(x.features())
            .unwrap()
            .max_abs_diff(&r.logits(x.features()).unwrap());
        assert!(diff <= 1e-9);
    }

    #[test]
    fn broken_scales_are_detected() {
        let m = Mlp::init(&[5, 7, 3], 2, 5).unwrap();
        let spec = RescalingSpec::new(vec![1.0, 1.0], 2).unwrap();
        let bad = rescale_by(&m, &[1.5, 1.0]).unwrap();
        let rep = verify_against(&m, &bad, &spec, &random_data(30, 5, 3, 3)).unwrap();
        assert!(!rep.outputs_ok);
        assert!(!rep.pass);
    }

    #[test]
    fn length_mismatch_errors() {
        let m = Mlp::init(&[5, 7, 3], 2, 5).unwrap();
        let spec = RescalingSpec::new(vec![1.0], 2).unwrap();
        assert!(rescale_network(&m, &spec).is_err());
        assert!(RescalingSpec::new(vec![0.0], 2).is_err());
    }
}
