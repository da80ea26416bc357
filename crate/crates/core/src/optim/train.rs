use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{softmax_ce, Mlp};
use crate::optim::{adam_step, sgd_step, AdamState, Optimizer, TrainConfig};

/// Rows per forward pass when evaluating a whole dataset.
const EVAL_CHUNK: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetEval {
    /// Mean cross-entropy over the dataset.
    pub loss: f64,
    pub accuracy: f64,
    pub correct: usize,
}

/// Mean loss and accuracy of `model` over all of `ds`.
pub fn evaluate_dataset(model: &Mlp, ds: &Dataset) -> Result<DatasetEval> {
    let mut loss_sum = 0.0;
    let mut correct = 0;
    let idx: Vec<usize> = (0..ds.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = ds.batch(chunk);
        let logits = model.logits(&x)?;
        let (loss, _) = softmax_ce(&logits, &y)?;
        loss_sum += loss * chunk.len() as f64;
        for (i, &label) in y.iter().enumerate() {
            if argmax(logits.row(i)) == label {
                correct += 1;
            }
        }
    }
    Ok(DatasetEval {
        loss: loss_sum / ds.len() as f64,
        accuracy: correct as f64 / ds.len() as f64,
        correct,
    })
}

/// Index of the largest entry, lowest index on ties.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean over mini-batches of the batch data loss.
    pub mean_batch_loss: f64,
    /// `Σ ‖Wᵏ‖_F²` after the epoch.
    pub penalty: f64,
    /// Frobenius norm of each collapsed layer after the epoch.
    pub collapsed_norms: Vec<f64>,
    /// Full-dataset `data loss + λ·penalty`, when evaluated.
    pub objective: Option<f64>,
    pub train_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub final_data_loss: f64,
    pub final_objective: f64,
    pub final_accuracy: f64,
}

/// `data loss + λ Σ ‖Wᵏ‖_F²` over the whole dataset.
pub fn objective(model: &Mlp, ds: &Dataset, weight_decay: f64) -> Result<f64> {
    Ok(evaluate_dataset(model, ds)?.loss + weight_decay * model.penalty())
}

/// Shuffled mini-batch training, deterministic given `cfg.seed`.
///
/// Epoch `e` visits the examples in a Fisher–Yates permutation drawn from
/// ChaCha stream `e` of the run seed; the last batch may be smaller.
pub fn train(model: &mut Mlp, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with(model, ds, cfg, |_, _| Ok(ControlFlow::Continue(())))
}

/// [`train`] with a hook called after every epoch, e.g. to score a
/// validation split or snapshot the best model so far. Returning
/// `Break` ends training after that epoch.
pub fn train_with<F>(model: &mut Mlp, ds: &Dataset, cfg: &TrainConfig, mut on_epoch: F) -> Result<TrainReport>
where
    F: FnMut(&EpochMetrics, &Mlp) -> Result<ControlFlow<()>>,
{
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if ds.dim() != model.in_dim() {
        return Err(Error::DimensionMismatch {
            op: "train",
            left: (ds.len(), ds.dim()),
            right: (model.in_dim(), model.out_dim()),
        });
    }
    if ds.num_classes() > model.out_dim() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} classes but the model outputs {}",
            ds.num_classes(),
            model.out_dim()
        )));
    }

    let mut adam = AdamState::new(model);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut last_eval = None;
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = ds.batch(chunk);
            let (logits, cache) = model.forward(&x)?;
            let (loss, dlogits) = softmax_ce(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b, loss });
            }
            let grads = model.backward(&cache, &dlogits)?;
            match cfg.optimizer {
                Optimizer::Adam => adam_step(model, &grads, &mut adam, cfg)?,
                Optimizer::Sgd => sgd_step(model, &grads, cfg)?,
            }
            loss_sum += loss;
            batches += 1;
        }

        let is_last = epoch + 1 == cfg.epochs;
        let eval = if cfg.eval_every_epoch || is_last {
            Some(evaluate_dataset(model, ds)?)
        } else {
            None
        };
        let penalty = model.penalty();
        let metrics = EpochMetrics {
            epoch,
            mean_batch_loss: loss_sum / batches as f64,
            penalty,
            collapsed_norms: model.collapsed_weights().iter().map(|w| w.frobenius_norm()).collect(),
            objective: eval.map(|e| e.loss + cfg.weight_decay * penalty),
            train_accuracy: eval.map(|e| e.accuracy),
        };
        log::info!(
            "epoch {:>3}: batch loss {:.5}, penalty {:.4}{}",
            epoch + 1,
            metrics.mean_batch_loss,
            penalty,
            metrics
                .train_accuracy
                .map(|a| format!(", train acc {a:.4}"))
                .unwrap_or_default()
        );
        if let Some(e) = eval {
            last_eval = Some((epoch, e));
        }
        let flow = on_epoch(&metrics, model)?;
        history.push(metrics);
        if flow.is_break() {
            break;
        }
    }

    let last = match last_eval {
        Some((e, eval)) if e + 1 == history.len() => eval,
        _ => evaluate_dataset(model, ds)?,
    };
    Ok(TrainReport {
        final_data_loss: last.loss,
        final_objective: last.loss + cfg.weight_decay * model.penalty(),
        final_accuracy: last.accuracy,
        epochs: history,
    })
}

/// Training run with the epoch chosen on a held-out split.
#[derive(Debug, Clone)]
pub struct Selected {
    /// Snapshot taken after `best_epoch`.
    pub model: Mlp,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Validation accuracy after every epoch.
    pub val_accuracy: Vec<f64>,
    pub report: TrainReport,
    /// Training stopped early because the network died (see [`is_dead`]).
    pub collapsed: bool,
}

/// Trains `model` on `fit` and keeps the snapshot with the highest
/// accuracy on `val`; the earliest epoch wins ties.
pub fn train_select(mut model: Mlp, fit: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<Selected> {
    let mut val_accuracy = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Mlp)> = None;
    let mut collapsed = false;
    let report = train_with(&mut model, fit, cfg, |m, net| {
        let acc = evaluate_dataset(net, val)?.accuracy;
        val_accuracy.push(acc);
        if best.as_ref().is_none_or(|b| acc > b.1) {
            best = Some((m.epoch, acc, net.clone()));
        }
        if is_dead(net, val)? && is_dead(net, fit)? {
            log::warn!(
                "every logit is zero after epoch {}; the network cannot recover",
                m.epoch + 1
            );
            collapsed = true;
            return Ok(ControlFlow::Break(()));
        }
        Ok(ControlFlow::Continue(()))
    })?;
    let (best_epoch, best_val_accuracy, model) = best.expect("at least one epoch");
    Ok(Selected {
        model,
        best_epoch,
        best_val_accuracy,
        val_accuracy,
        report,
        collapsed,
    })
}

/// True when the network outputs exactly zero for every example of `ds`.
///
/// Without biases that means the last hidden layer is zero on all of
/// `ds`, so on the training set every gradient vanishes and only weight
/// decay acts, which keeps the network dead.
pub fn is_dead(model: &Mlp, ds: &Dataset) -> Result<bool> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, _) = ds.batch(chunk);
        if model.logits(&x)?.as_slice().iter().any(|&v| v != 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}
