use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_nt, matmul_tn, Mat};
use crate::nn::dense::{init_factorized_with, FactorizedDense};

/// Bias-free ReLU network whose layers are factorized dense maps.
///
/// ReLU follows every layer except the last. Inputs are row-major batches
/// (`batch × in_dim`), so a layer computes `h ↦ h · Wᴺᵀ ⋯ W¹ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<FactorizedDense>,
}

/// Intermediates recorded by [`Mlp::forward`] for the backward pass.
///
/// `factor_inputs[l][k]` is the batch matrix that factor `k` of layer `l`
/// was applied to; the last entry of each layer is that layer's input
/// (the previous layer's post-activation).
#[derive(Debug, Clone)]
pub struct BatchActivations {
    factor_inputs: Vec<Vec<Mat>>,
    factor_shapes: Vec<Vec<(usize, usize)>>,
    batch: usize,
}

impl BatchActivations {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Post-activation output of hidden layer `l` (`l < L − 1`).
    pub fn post_activation(&self, l: usize) -> &Mat {
        self.factor_inputs[l + 1].last().expect("non-empty layer")
    }
}

/// Per-factor gradients in the order of [`Mlp::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Mat>);

impl Gradients {
    pub fn as_slice(&self) -> &[Mat] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, g| m.max(g.max_abs()))
    }
}

impl Mlp {
    pub fn new(layers: Vec<FactorizedDense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::InvalidShape(format!(
                    "layer {i} outputs {} features but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Random network with widths `dims = [in, h₁, …, out]` and `depth`
    /// factors per layer.
    pub fn init(dims: &[usize], depth: usize, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument("need at least input and output widths".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| init_factorized_with(w[1], w[0], depth, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[FactorizedDense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [FactorizedDense] {
        &mut self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Widths `[in, h₁, …, out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(FactorizedDense::out_dim));
        d
    }

    /// Every factor in canonical order: layer-major, factor-minor.
    pub fn params(&self) -> impl Iterator<Item = &Mat> {
        self.layers.iter().flat_map(|l| l.factors().iter())
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut Mat> {
        self.layers.iter_mut().flat_map(|l| l.factors_mut().iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(FactorizedDense::param_count).sum()
    }

    /// `Σ_l Σ_k ‖Wᵏ_l‖_F²`.
    pub fn penalty(&self) -> f64 {
        self.layers.iter().map(FactorizedDense::sum_squares).sum()
    }

    /// The same network with each layer replaced by its collapsed weight.
    pub fn collapsed(&self) -> Mlp {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| FactorizedDense::dense(l.collapse()))
                .collect(),
        }
    }

    pub fn collapsed_weights(&self) -> Vec<Mat> {
        self.layers.iter().map(FactorizedDense::collapse).collect()
    }

    fn check_input(&self, x: &Mat) -> Result<()> {
        if x.cols() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                op: "forward",
                left: x.shape(),
                right: (self.in_dim(), self.out_dim()),
            });
        }
        Ok(())
    }

    /// Logits only, without recording intermediates.
    pub fn logits(&self, x: &Mat) -> Result<Mat> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            for f in layer.factors().iter().rev() {
                h = matmul_nt(&h, f)?;
            }
            if l < last {
                relu_in_place(&mut h);
            }
        }
        Ok(h)
    }

    /// Forward pass through the factor chain, recording what backward needs.
    pub fn forward(&self, x: &Mat) -> Result<(Mat, BatchActivations)> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut factor_inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let n = layer.depth();
            let mut inputs = vec![None; n];
            for k in (0..n).rev() {
                let out = matmul_nt(&h, &layer.factors()[k])?;
                inputs[k] = Some(std::mem::replace(&mut h, out));
            }
            factor_inputs.push(inputs.into_iter().map(|m| m.expect("filled")).collect());
            if l < last {
                relu_in_place(&mut h);
            }
        }
        let cache = BatchActivations {
            factor_inputs,
            factor_shapes: self.factor_shapes(),
            batch: x.rows(),
        };
        Ok((h, cache))
    }

    fn factor_shapes(&self) -> Vec<Vec<(usize, usize)>> {
        self.layers
            .iter()
            .map(|l| l.factors().iter().map(Mat::shape).collect())
            .collect()
    }

    /// Exact gradient of the data loss with respect to every factor, given
    /// the loss gradient at the logits.
    pub fn backward(&self, cache: &BatchActivations, dlogits: &Mat) -> Result<Gradients> {
        if cache.factor_shapes != self.factor_shapes() {
            return Err(Error::StaleCache("factor shapes differ from the forward pass".into()));
        }
        if dlogits.shape() != (cache.batch, self.out_dim()) {
            return Err(Error::StaleCache(format!(
                "dlogits is {}x{}, forward produced {}x{}",
                dlogits.rows(),
                dlogits.cols(),
                cache.batch,
                self.out_dim()
            )));
        }
        let mut per_layer: Vec<Vec<Mat>> = Vec::with_capacity(self.layers.len());
        let mut g = dlogits.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let inputs = &cache.factor_inputs[l];
            let n = layer.depth();
            let mut grads = Vec::with_capacity(n);
            for k in 0..n {
                grads.push(matmul_tn(&g, &inputs[k])?);
                if k + 1 < n || l > 0 {
                    g = matmul(&g, &layer.factors()[k])?;
                }
            }
            per_layer.push(grads);
            if l > 0 {
                // ReLU mask from the previous layer's post-activation.
                let post = &inputs[n - 1];
                for (gv, &a) in g.as_mut_slice().iter_mut().zip(post.as_slice()) {
                    if a <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
        }
        per_layer.reverse();
        Ok(Gradients(per_layer.into_iter().flatten().collect()))
    }
}

fn relu_in_place(m: &mut Mat) {
    for x in m.as_mut_slice() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Mean softmax cross-entropy and its gradient `(softmax − onehot) / batch`.
pub fn softmax_ce(logits: &Mat, labels: &[usize]) -> Result<(f64, Mat)> {
    let (batch, classes) = logits.shape();
    if labels.len() != batch {
        return Err(Error::InvalidArgument(format!(
            "{batch} logit rows but {} labels",
            labels.len()
        )));
    }
    let mut grad = Mat::zeros(batch, classes);
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::LabelOutOfRange { label: y, classes });
        }
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[y];
        let g = grad.row_mut(i);
        for (j, z) in row.iter().enumerate() {
            g[j] = (z - lse).exp() / batch as f64;
        }
        g[y] -= 1.0 / batch as f64;
    }
    Ok((total / batch as f64, grad))
}

/// Mean cross-entropy only.
pub fn cross_entropy(logits: &Mat, labels: &[usize]) -> Result<f64> {
    softmax_ce(logits, labels).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_factorized;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::random_normal(rows, cols, 1.0, &mut rng)
    }

    #[test]
    fn zero_input_gives_zero_logits() {
        let model = Mlp::init(&[5, 4, 3], 2, 1).unwrap();
        let out = model.logits(&Mat::zeros(2, 5)).unwrap();
        assert_eq!(out, Mat::zeros(2, 3));
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let model = Mlp::new(vec![FactorizedDense::dense(Mat::identity(4))]).unwrap();
        let x = random_input(3, 4, 2);
        assert_eq!(model.logits(&x).unwrap(), x);
    }

    #[test]
    fn factorized_forward_matches_collapsed_forward() {
        let model = Mlp::init(&[6, 5, 5, 3], 3, 3).unwrap();
        let x = random_input(7, 6, 4);
        let a = model.logits(&x).unwrap();
        let b = model.collapsed().logits(&x).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-9);
        let (c, _) = model.forward(&x).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let model = Mlp::init(&[6, 3], 1, 3).unwrap();
        assert!(matches!(
            model.forward(&Mat::zeros(2, 5)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_dlogits_gives_zero_gradients() {
        let model = Mlp::init(&[4, 3, 2], 2, 5).unwrap();
        let (_, cache) = model.forward(&random_input(3, 4, 6)).unwrap();
        let g = model.backward(&cache, &Mat::zeros(3, 2)).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert_eq!(g.0.len(), 4);
    }

    #[test]
    fn linear_layer_gradient_is_dlogits_t_x() {
        let layer = init_factorized(3, 4, 1, 7).unwrap();
        let model = Mlp::new(vec![layer]).unwrap();
        let x = random_input(5, 4, 8);
        let d = random_input(5, 3, 9);
        let (_, cache) = model.forward(&x).unwrap();
        let g = model.backward(&cache, &d).unwrap();
        let expect = matmul_tn(&d, &x).unwrap();
        assert!(g.0[0].max_abs_diff(&expect) <= 1e-12);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let small = Mlp::init(&[4, 3, 2], 2, 5).unwrap();
        let other = Mlp::init(&[4, 3, 2], 1, 5).unwrap();
        let (_, cache) = small.forward(&random_input(3, 4, 6)).unwrap();
        assert!(matches!(
            other.backward(&cache, &Mat::zeros(3, 2)),
            Err(Error::StaleCache(_))
        ));
        assert!(matches!(
            small.backward(&cache, &Mat::zeros(4, 2)),
            Err(Error::StaleCache(_))
        ));
    }

    #[test]
    fn softmax_ce_uniform_logits() {
        let (loss, _) = softmax_ce(&Mat::zeros(2, 4), &[0, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn softmax_ce_large_margin_goes_to_zero() {
        let logits = Mat::from_rows(&[&[1e4, 0.0, 0.0]]);
        let (loss, grad) = softmax_ce(&logits, &[0]).unwrap();
        assert!(loss < 1e-300);
        assert!(grad.max_abs() < 1e-300);
    }

    #[test]
    fn softmax_ce_matches_direct_formula() {
        let logits = random_input(6, 5, 10);
        let labels = [0, 4, 2, 2, 1, 3];
        let (loss, grad) = softmax_ce(&logits, &labels).unwrap();
        let mut expect = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let z = logits.row(i);
            let denom: f64 = z.iter().map(|v| v.exp()).sum();
            expect += -(z[y].exp() / denom).ln();
            for j in 0..5 {
                let p = z[j].exp() / denom;
                let t = if j == y { 1.0 } else { 0.0 };
                assert!((grad.get(i, j) - (p - t) / 6.0).abs() <= 1e-12);
            }
        }
        assert!((loss - expect / 6.0).abs() <= 1e-12);
    }

    #[test]
    fn softmax_ce_label_out_of_range() {
        assert!(matches!(
            softmax_ce(&Mat::zeros(1, 3), &[3]),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }
}
