//! Adam and SGD on the weight-decay-penalized objective, plus the
//! mini-batch training loop.

mod train;

pub(crate) use train::argmax;
pub use train::{
    evaluate_dataset, is_dead, objective, train, train_select, train_with, DatasetEval, EpochMetrics, Selected,
    TrainReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nn::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(Optimizer::Adam),
            "sgd" => Ok(Optimizer::Sgd),
            other => Err(Error::InvalidArgument(format!(
                "unknown optimizer {other:?} (expected adam or sgd)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    /// λ in `data loss + λ Σ ‖Wᵏ‖_F²`.
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Evaluate the full objective and accuracy after every epoch instead
    /// of only after the last one.
    pub eval_every_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            weight_decay: 0.0,
            epochs: 50,
            batch_size: 128,
            seed: 0,
            optimizer: Optimizer::Adam,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            eval_every_epoch: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be non-negative, got {}", self.weight_decay));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive".into());
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad(format!(
                "Adam betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            ));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad(format!("Adam epsilon must be positive, got {}", self.eps));
        }
        Ok(())
    }
}

/// Adam moments, one pair per factor in [`Mlp::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Mat>,
    v: Vec<Mat>,
    t: u64,
}

impl AdamState {
    pub fn new(model: &Mlp) -> Self {
        let zeros: Vec<Mat> = model.params().map(|p| Mat::zeros(p.rows(), p.cols())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Mat] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Mat] {
        &self.v
    }
}

fn check_shapes<'a>(params: impl Iterator<Item = &'a Mat>, grads: &Gradients, what: &'static str) -> Result<()> {
    let shapes: Vec<_> = params.map(Mat::shape).collect();
    let gshapes: Vec<_> = grads.as_slice().iter().map(Mat::shape).collect();
    if shapes.len() != gshapes.len() {
        return Err(Error::InvalidShape(format!(
            "{what}: {} gradients for {} factors",
            gshapes.len(),
            shapes.len()
        )));
    }
    for (p, g) in shapes.into_iter().zip(gshapes) {
        if p != g {
            return Err(Error::DimensionMismatch {
                op: what,
                left: p,
                right: g,
            });
        }
    }
    Ok(())
}

/// One Adam step on `g + 2λW` with bias correction.
pub fn adam_step(model: &mut Mlp, grads: &Gradients, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    check_shapes(model.params(), grads, "adam_step")?;
    if state.m.len() != grads.as_slice().len()
        || state
            .m
            .iter()
            .zip(grads.as_slice())
            .any(|(m, g)| m.shape() != g.shape())
    {
        return Err(Error::InvalidShape("adam_step: moments do not match the model".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let two_lambda = 2.0 * cfg.weight_decay;
    for (((w, g), m), v) in model
        .params_mut()
        .zip(grads.as_slice())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let w = w.as_mut_slice();
        let m = m.as_mut_slice();
        let v = v.as_mut_slice();
        for i in 0..w.len() {
            let ge = g.as_slice()[i] + two_lambda * w[i];
            m[i] = b1 * m[i] + (1.0 - b1) * ge;
            v[i] = b2 * v[i] + (1.0 - b2) * ge * ge;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            w[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// `W ← W − lr·(g + 2λW)`.
pub fn sgd_step(model: &mut Mlp, grads: &Gradients, cfg: &TrainConfig) -> Result<()> {
    check_shapes(model.params(), grads, "sgd_step")?;
    let two_lambda = 2.0 * cfg.weight_decay;
    for (w, g) in model.params_mut().zip(grads.as_slice()) {
        for (wi, gi) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *wi -= cfg.lr * (gi + two_lambda * *wi);
        }
    }
    Ok(())
}
