use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::model::CompressedModel;
use crate::compress::plan::{ceil_count, gsvt, CompressionPlan, Decomposition, PlanParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{truncate, Mat};
use crate::nn::cross_entropy;

/// Where the iterative search starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsvtStart {
    /// Every layer at full rank.
    Full,
    /// The GSVT plan with this keep fraction.
    Gsvt(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsvtOptions {
    /// Parameters removed per round, at least.
    pub step_params: usize,
    /// Stop once `Σ (m_l + n_l)·r_l ≤ target_params`.
    pub target_params: usize,
    pub start: IsvtStart,
}

impl Default for IsvtOptions {
    fn default() -> Self {
        Self {
            step_params: 500,
            target_params: 0,
            start: IsvtStart::Full,
        }
    }
}

/// One committed truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsvtRound {
    pub layer: usize,
    pub new_rank: usize,
    pub probe_loss: f64,
    pub retained_params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsvtOutcome {
    pub plan: CompressionPlan,
    pub rounds: Vec<IsvtRound>,
    /// False when every layer reached rank 1 before the target.
    pub reached_target: bool,
}

/// Layer, new rank, its truncated pair and the probe loss.
type Candidate = (usize, usize, Mat, Mat, f64);

/// Singular values to drop from an `m × n` layer so that at least `step`
/// parameters go, never going below rank 1.
pub(crate) fn drop_count(m: usize, n: usize, step: usize) -> usize {
    ceil_count(step as f64 / (m + n) as f64).max(1)
}

/// Iterative SVT: each round tentatively shrinks every layer still above
/// rank 1 by enough singular values to remove `step_params` parameters,
/// scores each candidate by the cross-entropy on `probe`, and commits the
/// lowest (ties go to the lowest layer index).
pub fn isvt(dec: &Decomposition, probe: &Dataset, opts: &IsvtOptions) -> Result<IsvtOutcome> {
    if opts.step_params == 0 {
        return Err(Error::InvalidArgument(
            "ISVT step must be at least one parameter".into(),
        ));
    }
    if probe.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let shapes = dec.shapes();
    let mut ranks = match opts.start {
        IsvtStart::Full => dec.full_ranks(),
        IsvtStart::Gsvt(keep) => gsvt(dec, keep)?.ranks().to_vec(),
    };
    let mut pairs: Vec<(Mat, Mat)> = dec
        .layers()
        .iter()
        .zip(&ranks)
        .map(|(s, &r)| truncate(s, r))
        .collect::<Result<_>>()?;
    let (x, y) = probe.batch(&(0..probe.len()).collect::<Vec<_>>());

    let retained = |ranks: &[usize]| -> usize { ranks.iter().zip(&shapes).map(|(r, (m, n))| (m + n) * r).sum() };
    let mut rounds = Vec::new();
    let mut reached = true;
    while retained(&ranks) > opts.target_params {
        let candidates: Vec<(usize, usize)> = (0..ranks.len())
            .filter(|&l| ranks[l] > 1)
            .map(|l| {
                let (m, n) = shapes[l];
                (l, ranks[l].saturating_sub(drop_count(m, n, opts.step_params)).max(1))
            })
            .collect();
        if candidates.is_empty() {
            log::warn!(
                "ISVT stopped at {} parameters: every layer is at rank 1 (target {})",
                retained(&ranks),
                opts.target_params
            );
            reached = false;
            break;
        }
        let scored: Vec<Result<Candidate>> = candidates
            .par_iter()
            .map(|&(l, r)| {
                let (a, b) = truncate(&dec.layers()[l], r)?;
                let mut trial = pairs.clone();
                trial[l] = (a.clone(), b.clone());
                let loss = cross_entropy(&CompressedModel::from_pairs(trial)?.logits(&x)?, &y)?;
                Ok((l, r, a, b, loss))
            })
            .collect();
        let mut best: Option<Candidate> = None;
        for item in scored {
            let item = item?;
            let better = match &best {
                None => true,
                Some(b) => item.4.total_cmp(&b.4).is_lt(),
            };
            if better {
                best = Some(item);
            }
        }
        let (l, r, a, b, loss) = best.expect("at least one candidate");
        ranks[l] = r;
        pairs[l] = (a, b);
        rounds.push(IsvtRound {
            layer: l,
            new_rank: r,
            probe_loss: loss,
            retained_params: retained(&ranks),
        });
    }

    let warm = match opts.start {
        IsvtStart::Full => None,
        IsvtStart::Gsvt(k) => Some(k),
    };
    let plan = CompressionPlan::new(
        ranks,
        PlanParams::Isvt {
            step_params: opts.step_params,
            probe_size: probe.len(),
            target_params: opts.target_params,
            warm_start_keep: warm,
        },
        &shapes,
    )?;
    Ok(IsvtOutcome {
        plan,
        rounds,
        reached_target: reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::nn::Mlp;

    #[test]
    fn drop_count_rounds_up() {
        assert_eq!(drop_count(96, 96, 500), 3);
        assert_eq!(drop_count(10, 10, 20), 1);
        assert_eq!(drop_count(10, 10, 21), 2);
        assert_eq!(drop_count(784, 96, 500), 1);
    }

    #[test]
    fn single_layer_walks_down_like_lsvt() {
        let m = Mlp::init(&[10, 6], 1, 0).unwrap();
        let dec = Decomposition::of(&m).unwrap();
        let probe = synth_blobs(5, 6, 10, 2.0, 1).unwrap();
        let opts = IsvtOptions {
            step_params: 16,
            target_params: 0,
            start: IsvtStart::Full,
        };
        let out = isvt(&dec, &probe, &opts).unwrap();
        let ranks: Vec<usize> = out.rounds.iter().map(|r| r.new_rank).collect();
        assert_eq!(ranks, vec![5, 4, 3, 2, 1]);
        assert!(!out.reached_target);
        assert_eq!(out.plan.ranks(), &[1]);
    }

    #[test]
    fn stops_at_target_and_is_reproducible() {
        let m = Mlp::init(&[12, 10, 6], 2, 3).unwrap();
        let dec = Decomposition::of(&m).unwrap();
        let probe = synth_blobs(4, 6, 12, 2.0, 2).unwrap();
        let opts = IsvtOptions {
            step_params: 30,
            target_params: 200,
            start: IsvtStart::Full,
        };
        let a = isvt(&dec, &probe, &opts).unwrap();
        assert!(a.reached_target);
        assert!(a.plan.stored_params(&dec.shapes()) <= 200);
        assert_eq!(a, isvt(&dec, &probe, &opts).unwrap());
    }

    #[test]
    fn warm_start_begins_from_gsvt() {
        let m = Mlp::init(&[12, 10, 6], 1, 3).unwrap();
        let dec = Decomposition::of(&m).unwrap();
        let probe = synth_blobs(4, 6, 12, 2.0, 2).unwrap();
        let start = gsvt(&dec, 0.5).unwrap();
        let opts = IsvtOptions {
            step_params: 1,
            target_params: usize::MAX,
            start: IsvtStart::Gsvt(0.5),
        };
        let out = isvt(&dec, &probe, &opts).unwrap();
        assert!(out.rounds.is_empty());
        assert_eq!(out.plan.ranks(), start.ranks());
    }

    #[test]
    fn rejects_zero_step() {
        let m = Mlp::init(&[4, 2], 1, 0).unwrap();
        let dec = Decomposition::of(&m).unwrap();
        let probe = synth_blobs(2, 2, 4, 1.0, 0).unwrap();
        let opts = IsvtOptions {
            step_params: 0,
            ..IsvtOptions::default()
        };
        assert!(isvt(&dec, &probe, &opts).is_err());
    }
}
