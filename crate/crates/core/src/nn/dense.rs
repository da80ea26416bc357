use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{chain_product, Mat};

/// One logical weight `W = W¹ · W² ⋯ Wᴺ` kept as its factors.
///
/// The factors must chain (`factors[k].cols == factors[k + 1].rows`).
/// Layers built by [`init_factorized`] have `W¹ ∈ ℝ^{m×n}` followed by
/// `N − 1` square `n × n` factors; fine-tuned compressed layers use the
/// rectangular pair `(m × r, r × n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedDense {
    factors: Vec<Mat>,
}

impl FactorizedDense {
    pub fn new(factors: Vec<Mat>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("a layer needs at least one factor".into()));
        }
        for (k, pair) in factors.windows(2).enumerate() {
            if pair[0].cols() != pair[1].rows() {
                return Err(Error::InvalidShape(format!(
                    "factor {k} is {}x{} but factor {} is {}x{}",
                    pair[0].rows(),
                    pair[0].cols(),
                    k + 1,
                    pair[1].rows(),
                    pair[1].cols()
                )));
            }
        }
        Ok(Self { factors })
    }

    /// Plain (non-factorized) layer, `N = 1`.
    pub fn dense(weight: Mat) -> Self {
        Self { factors: vec![weight] }
    }

    pub fn out_dim(&self) -> usize {
        self.factors[0].rows()
    }

    pub fn in_dim(&self) -> usize {
        self.factors[self.factors.len() - 1].cols()
    }

    pub fn depth(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Mat] {
        &self.factors
    }

    pub(crate) fn factors_mut(&mut self) -> &mut [Mat] {
        &mut self.factors
    }

    /// True when every factor after the first is `n × n`.
    pub fn has_square_tail(&self) -> bool {
        let n = self.in_dim();
        self.factors[0].cols() == n && self.factors[1..].iter().all(|f| f.shape() == (n, n))
    }

    /// Left-to-right product of the factors (`m × n`).
    pub fn collapse(&self) -> Mat {
        chain_product(&self.factors).expect("factors chain by construction")
    }

    pub fn param_count(&self) -> usize {
        self.factors.iter().map(Mat::len).sum()
    }

    /// `Σₖ ‖Wᵏ‖_F²`.
    pub fn sum_squares(&self) -> f64 {
        self.factors.iter().map(Mat::sum_squares).sum()
    }

    /// Multiplies every factor by `c`.
    pub fn scale_factors(&mut self, c: f64) {
        self.factors.iter_mut().for_each(|f| f.scale_in_place(c));
    }
}

/// Left-to-right product of a layer's factors.
pub fn collapse(layer: &FactorizedDense) -> Mat {
    layer.collapse()
}

/// Standard deviations used by [`init_factorized`]: `sqrt(2/n)` for the
/// `m × n` head and `sqrt(1/n)` for each `n × n` tail factor, so the
/// collapsed product has the He entry variance `2/n` for any depth.
pub fn factor_stds(n: usize, depth: usize) -> Vec<f64> {
    let mut stds = vec![(2.0 / n as f64).sqrt()];
    stds.extend(std::iter::repeat_n((1.0 / n as f64).sqrt(), depth.saturating_sub(1)));
    stds
}

/// Random factorized layer, deterministic per seed.
pub fn init_factorized(m: usize, n: usize, depth: usize, seed: u64) -> Result<FactorizedDense> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_factorized_with(m, n, depth, &mut rng)
}

pub(crate) fn init_factorized_with<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    depth: usize,
    rng: &mut R,
) -> Result<FactorizedDense> {
    if m == 0 || n == 0 || depth == 0 {
        return Err(Error::InvalidArgument(format!(
            "layer dims and depth must be positive (m={m}, n={n}, N={depth})"
        )));
    }
    let stds = factor_stds(n, depth);
    let factors = stds
        .iter()
        .enumerate()
        .map(|(k, &std)| {
            let rows = if k == 0 { m } else { n };
            Mat::random_normal(rows, n, std, rng)
        })
        .collect();
    FactorizedDense::new(factors)
}
