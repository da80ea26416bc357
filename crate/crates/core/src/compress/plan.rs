use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, SvdResult};
use crate::nn::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Lsvt,
    Gsvt,
    Isvt,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsvt" => Ok(Scheme::Lsvt),
            "gsvt" => Ok(Scheme::Gsvt),
            "isvt" => Ok(Scheme::Isvt),
            other => Err(Error::InvalidArgument(format!(
                "unknown scheme {other:?} (expected lsvt, gsvt or isvt)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Lsvt => "lsvt",
            Scheme::Gsvt => "gsvt",
            Scheme::Isvt => "isvt",
        })
    }
}

/// Rank rule shared by every layer under LSVT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankRule {
    Rank(usize),
    Fraction(f64),
}

/// The knob that produced a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum PlanParams {
    Lsvt {
        rule: RankRule,
    },
    Gsvt {
        keep: f64,
    },
    Isvt {
        step_params: usize,
        probe_size: usize,
        target_params: usize,
        warm_start_keep: Option<f64>,
    },
}

/// One rank per layer plus the rule that chose them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionPlan {
    ranks: Vec<usize>,
    params: PlanParams,
}

impl CompressionPlan {
    /// Checks `1 ≤ r_l ≤ k_l` against the layer shapes.
    pub fn new(ranks: Vec<usize>, params: PlanParams, shapes: &[(usize, usize)]) -> Result<Self> {
        if ranks.len() != shapes.len() {
            return Err(Error::InvalidShape(format!(
                "plan has {} ranks for {} layers",
                ranks.len(),
                shapes.len()
            )));
        }
        for (l, (&r, &(m, n))) in ranks.iter().zip(shapes).enumerate() {
            let max = m.min(n);
            if r == 0 || r > max {
                return Err(Error::RankOutOfRange {
                    layer: Some(l),
                    rank: r,
                    max,
                });
            }
        }
        Ok(Self { ranks, params })
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn params(&self) -> &PlanParams {
        &self.params
    }

    pub fn scheme(&self) -> Scheme {
        match self.params {
            PlanParams::Lsvt { .. } => Scheme::Lsvt,
            PlanParams::Gsvt { .. } => Scheme::Gsvt,
            PlanParams::Isvt { .. } => Scheme::Isvt,
        }
    }

    /// `Σ (m_l + n_l)·r_l`.
    pub fn stored_params(&self, shapes: &[(usize, usize)]) -> usize {
        self.ranks.iter().zip(shapes).map(|(r, (m, n))| (m + n) * r).sum()
    }
}

/// SVDs of every collapsed layer of a model, computed once and shared by
/// plan construction and plan application.
#[derive(Debug, Clone)]
pub struct Decomposition {
    svds: Vec<SvdResult>,
}

impl Decomposition {
    pub fn of(model: &Mlp) -> Result<Self> {
        let svds = model.collapsed_weights().iter().map(svd).collect::<Result<Vec<_>>>()?;
        Ok(Self { svds })
    }

    pub fn layers(&self) -> &[SvdResult] {
        &self.svds
    }

    pub fn num_layers(&self) -> usize {
        self.svds.len()
    }

    /// `(m_l, n_l)` of each collapsed layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.svds.iter().map(SvdResult::shape).collect()
    }

    /// `k_l = min(m_l, n_l)` of each layer.
    pub fn full_ranks(&self) -> Vec<usize> {
        self.svds.iter().map(SvdResult::k).collect()
    }

    pub fn spectra(&self) -> Vec<Vec<f64>> {
        self.svds.iter().map(|s| s.s().to_vec()).collect()
    }

    pub fn full_rank_plan(&self) -> CompressionPlan {
        CompressionPlan {
            ranks: self.full_ranks(),
            params: PlanParams::Lsvt {
                rule: RankRule::Fraction(1.0),
            },
        }
    }
}

/// Descending singular values of every collapsed layer.
pub fn spectra(model: &Mlp) -> Result<Vec<Vec<f64>>> {
    Ok(Decomposition::of(model)?.spectra())
}

/// `ceil(x)` that ignores floating noise just above an integer.
pub(crate) fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

fn check_fraction(f: f64, what: &str) -> Result<()> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::InvalidArgument(format!("{what} must lie in (0, 1], got {f}")));
    }
    Ok(())
}

/// Local SVT: the same rank rule for every layer.
pub fn lsvt(dec: &Decomposition, rule: RankRule) -> Result<CompressionPlan> {
    let ks = dec.full_ranks();
    let ranks = match rule {
        RankRule::Rank(r) => vec![r; ks.len()],
        RankRule::Fraction(f) => {
            check_fraction(f, "LSVT fraction")?;
            ks.iter().map(|&k| ceil_count(f * k as f64).max(1)).collect()
        }
    };
    CompressionPlan::new(ranks, PlanParams::Lsvt { rule }, &dec.shapes())
}

/// Normalized value quantized so that spectra differing only by rounding
/// rank identically.
fn quantize(v: f64) -> i64 {
    (v * (1u64 << 40) as f64).round() as i64
}

/// Global SVT: each spectrum is divided by its own largest value, all
/// normalized values are pooled, and every value at least as large as the
/// `ceil(keep·total)`-th largest is kept (ties at the threshold are all
/// kept). Each layer keeps at least one value.
pub fn gsvt(dec: &Decomposition, keep: f64) -> Result<CompressionPlan> {
    check_fraction(keep, "GSVT keep fraction")?;
    let spectra = dec.spectra();
    let mut pooled: Vec<i64> = Vec::new();
    let normalized: Vec<Vec<i64>> = spectra
        .iter()
        .map(|s| {
            let s1 = s.first().copied().unwrap_or(0.0);
            s.iter().map(|&v| if s1 > 0.0 { quantize(v / s1) } else { 0 }).collect()
        })
        .collect();
    for n in &normalized {
        pooled.extend_from_slice(n);
    }
    pooled.sort_unstable_by(|a, b| b.cmp(a));
    let count = ceil_count(keep * pooled.len() as f64).clamp(1, pooled.len());
    let threshold = pooled[count - 1];
    let ranks = normalized
        .iter()
        .map(|n| n.iter().filter(|&&v| v >= threshold).count().max(1))
        .collect();
    CompressionPlan::new(ranks, PlanParams::Gsvt { keep }, &dec.shapes())
}

/// Mean over layers of `r_l / k_l`.
pub fn retained_sv_fraction(plan: &CompressionPlan, dec: &Decomposition) -> Result<f64> {
    let ks = dec.full_ranks();
    if ks.len() != plan.ranks.len() {
        return Err(Error::InvalidShape(format!(
            "plan has {} ranks for {} layers",
            plan.ranks.len(),
            ks.len()
        )));
    }
    Ok(plan
        .ranks
        .iter()
        .zip(&ks)
        .map(|(&r, &k)| r as f64 / k as f64)
        .sum::<f64>()
        / ks.len() as f64)
}
