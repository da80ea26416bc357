use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_nt, matmul_tn, schatten_from_values, schatten_norm, svd, Mat};

/// Exponents of the factorized objective
/// `(p Σᵢ (1/pᵢ)‖Rᵢ‖_{pᵢ}^{pᵢ})^{1/p}` with `Σᵢ 1/pᵢ = 1/p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchattenSpec {
    p: f64,
    exponents: Vec<f64>,
}

impl SchattenSpec {
    pub fn new(p: f64, exponents: Vec<f64>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::InvalidArgument("need at least one factor exponent".into()));
        }
        if p.is_nan() || p <= 0.0 || exponents.iter().any(|&q| q.is_nan() || q <= 0.0) {
            return Err(Error::InvalidArgument("Schatten exponents must be positive".into()));
        }
        let inv: f64 = exponents.iter().map(|q| 1.0 / q).sum();
        if (inv - 1.0 / p).abs() > 1e-12 * (1.0 / p).max(1.0) {
            return Err(Error::InvalidArgument(format!("Σ 1/pᵢ = {inv} but 1/p = {}", 1.0 / p)));
        }
        Ok(Self { p, exponents })
    }

    /// `N` Frobenius factors (`pᵢ = 2`), so `p = 2/N`.
    pub fn frobenius(depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        Self::new(2.0 / depth as f64, vec![2.0; depth])
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn depth(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    fn all_frobenius(&self) -> bool {
        self.exponents.iter().all(|&q| q == 2.0)
    }
}

/// SVD-based factors `R₁ = U Σ^{1/N}`, `Rᵢ = Σ^{1/N}`, `R_N = Σ^{1/N} Vᵀ`
/// whose product is `a`. For `N = 1` this is `a` itself.
pub fn balanced_factorization(a: &Mat, depth: usize) -> Result<Vec<Mat>> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if depth == 1 {
        return Ok(vec![a.clone()]);
    }
    let s = svd(a)?;
    let root: Vec<f64> = s.s().iter().map(|v| v.powf(1.0 / depth as f64)).collect();
    let d = Mat::diag(&root);
    let mut factors = Vec::with_capacity(depth);
    factors.push(matmul(s.u(), &d)?);
    for _ in 1..depth - 1 {
        factors.push(d.clone());
    }
    factors.push(matmul(&d, s.vt())?);
    Ok(factors)
}

/// `(p Σᵢ (1/pᵢ)‖Rᵢ‖_{pᵢ}^{pᵢ})^{1/p}`, evaluated literally.
pub fn factorization_objective(factors: &[Mat], spec: &SchattenSpec) -> Result<f64> {
    if factors.len() != spec.depth() {
        return Err(Error::InvalidArgument(format!(
            "{} factors for a depth-{} spec",
            factors.len(),
            spec.depth()
        )));
    }
    let mut total = 0.0;
    for (r, &q) in factors.iter().zip(spec.exponents()) {
        let norm_pow = if q == 2.0 {
            r.sum_squares()
        } else {
            schatten_from_values(svd(r)?.s(), q).powf(q)
        };
        total += norm_pow / q;
    }
    Ok((spec.p * total).powf(1.0 / spec.p))
}

/// Relative residual `‖∏Rᵢ − A‖_F / ‖A‖_F` below which an iterate counts
/// as feasible.
pub const FEASIBLE_TOL: f64 = 1e-10;

/// Settings of the augmented-Lagrangian descent used by [`verify_prop1`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Relative slack allowed above the analytic value.
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
            tol: 1e-2,
            max_outer: 60,
            max_inner: 3000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    /// `None` for the balanced start.
    pub seed: Option<u64>,
    /// Objective at the last iterate.
    pub final_value: f64,
    pub final_residual: f64,
    /// Smallest objective over all feasible iterates, if any.
    pub best_feasible: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub analytic: f64,
    pub balanced_value: f64,
    pub balanced_rel_error: f64,
    /// Best feasible value over all random restarts.
    pub descent_best: Option<f64>,
    /// Smallest feasible value seen anywhere, balanced start included.
    pub lowest_feasible: Option<f64>,
    pub restarts: Vec<RestartOutcome>,
    pub balanced_ok: bool,
    pub descent_ok: bool,
    pub lower_bound_ok: bool,
    pub pass: bool,
}

/// Checks that the balanced factorization attains the Schatten value, and
/// that descent from random starts approaches it from above without any
/// feasible iterate going below it.
pub fn verify_prop1(a: &Mat, spec: &SchattenSpec, opts: &DescentOptions) -> Result<Prop1Report> {
    if !spec.all_frobenius() {
        return Err(Error::InvalidArgument(
            "descent verification needs every factor exponent equal to 2".into(),
        ));
    }
    let analytic = schatten_norm(a, spec.p())?;
    let balanced = balanced_factorization(a, spec.depth())?;
    let balanced_value = factorization_objective(&balanced, spec)?;
    let balanced_rel_error = rel_diff(balanced_value, analytic);
    let balanced_ok = balanced_rel_error <= 1e-10;

    let problem = Problem::new(a, spec.depth());
    let mut starts: Vec<(Option<u64>, Vec<Mat>)> = vec![(None, problem.padded_balanced(&balanced))];
    let mut seeder = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let s: u64 = rand::Rng::random(&mut seeder);
        starts.push((Some(s), problem.random_start(s)));
    }
    let restarts: Vec<RestartOutcome> = starts
        .into_par_iter()
        .map(|(seed, start)| {
            let mut out = problem.descend(start, opts);
            out.seed = seed;
            out
        })
        .collect();

    let min_of = |it: &mut dyn Iterator<Item = f64>| it.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
    let descent_best = min_of(
        &mut restarts
            .iter()
            .filter(|r| r.seed.is_some())
            .filter_map(|r| r.best_feasible),
    );
    let lowest_feasible = min_of(&mut restarts.iter().filter_map(|r| r.best_feasible));
    let descent_ok = descent_best.is_some_and(|v| v <= analytic * (1.0 + opts.tol));
    let lower_bound_ok = lowest_feasible.is_none_or(|v| v >= analytic * (1.0 - 1e-8));
    Ok(Prop1Report {
        analytic,
        balanced_value,
        balanced_rel_error,
        descent_best,
        lowest_feasible,
        restarts,
        balanced_ok,
        descent_ok,
        lower_bound_ok,
        pass: balanced_ok && descent_ok && lower_bound_ok,
    })
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

/// The constrained problem `min (1/N)Σ‖Rᵢ‖² s.t. ∏Rᵢ = Â`, solved on the
/// normalized target `Â = A/‖A‖_F` with inner dimensions fixed to `n`.
struct Problem {
    target: Mat,
    scale: f64,
    depth: usize,
}

impl Problem {
    fn new(a: &Mat, depth: usize) -> Self {
        let scale = a.frobenius_norm();
        let target = if scale > 0.0 { a.scaled(1.0 / scale) } else { a.clone() };
        Self { target, scale, depth }
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        let (m, n) = self.target.shape();
        (0..self.depth).map(|i| if i == 0 { (m, n) } else { (n, n) }).collect()
    }

    /// Balanced factors (inner dimension `k`) padded with zeros to `n`,
    /// then normalized.
    fn padded_balanced(&self, balanced: &[Mat]) -> Vec<Mat> {
        let c = if self.scale > 0.0 {
            self.scale.powf(-1.0 / self.depth as f64)
        } else {
            1.0
        };
        self.shapes()
            .iter()
            .zip(balanced)
            .map(|(&(r, cc), f)| {
                Mat::from_fn(r, cc, |i, j| {
                    if i < f.rows() && j < f.cols() {
                        c * f.get(i, j)
                    } else {
                        0.0
                    }
                })
            })
            .collect()
    }

    fn random_start(&self, seed: u64) -> Vec<Mat> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.target.cols();
        let mut factors: Vec<Mat> = self
            .shapes()
            .iter()
            .map(|&(r, c)| Mat::random_normal(r, c, 1.0 / (n as f64).sqrt(), &mut rng))
            .collect();
        // Match the product's norm to the target's.
        let p = product(&factors);
        let norm = p.frobenius_norm();
        if norm > 0.0 {
            let c = norm.powf(-1.0 / self.depth as f64);
            factors.iter_mut().for_each(|f| f.scale_in_place(c));
        }
        factors
    }

    /// Objective value on the original scale.
    fn value(&self, factors: &[Mat]) -> f64 {
        let core: f64 = factors.iter().map(Mat::sum_squares).sum::<f64>() / self.depth as f64;
        self.scale * core.powf(self.depth as f64 / 2.0)
    }

    fn lagrangian(&self, factors: &[Mat], lambda: &Mat, mu: f64) -> (f64, Mat) {
        let core: f64 = factors.iter().map(Mat::sum_squares).sum::<f64>() / self.depth as f64;
        let resid = product(factors).sub(&self.target).expect("shapes match");
        let inner: f64 = lambda.as_slice().iter().zip(resid.as_slice()).map(|(a, b)| a * b).sum();
        (core + inner + 0.5 * mu * resid.sum_squares(), resid)
    }

    fn gradient(&self, factors: &[Mat], g: &Mat) -> Vec<Mat> {
        let n = factors.len();
        let (m, cols) = self.target.shape();
        // prefix[i] = R₀⋯R_{i−1}, suffix[i] = R_{i+1}⋯R_{N−1}.
        let mut prefix = vec![Mat::identity(m)];
        for f in &factors[..n - 1] {
            let next = matmul(prefix.last().unwrap(), f).unwrap();
            prefix.push(next);
        }
        let mut suffix = vec![Mat::identity(cols); n];
        for i in (0..n - 1).rev() {
            suffix[i] = matmul(&factors[i + 1], &suffix[i + 1]).unwrap();
        }
        (0..n)
            .map(|i| {
                let gi = matmul_nt(&matmul_tn(&prefix[i], g).unwrap(), &suffix[i]).unwrap();
                let mut out = factors[i].scaled(2.0 / self.depth as f64);
                out.axpy(1.0, &gi).unwrap();
                out
            })
            .collect()
    }

    fn descend(&self, mut factors: Vec<Mat>, opts: &DescentOptions) -> RestartOutcome {
        let target_norm = self.target.frobenius_norm().max(f64::MIN_POSITIVE);
        let mut lambda = Mat::zeros(self.target.rows(), self.target.cols());
        let mut mu = 10.0;
        let mut best_feasible: Option<f64> = None;
        let mut step: f64 = 1e-2;
        let mut prev_resid = f64::INFINITY;
        let mut diverged = false;
        let record = |factors: &[Mat], resid_norm: f64, best: &mut Option<f64>| {
            if resid_norm / target_norm <= FEASIBLE_TOL {
                let v = self.value(factors);
                *best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        };

        let (_, r0) = self.lagrangian(&factors, &lambda, mu);
        record(&factors, r0.frobenius_norm(), &mut best_feasible);
        'outer: for _ in 0..opts.max_outer {
            for _ in 0..opts.max_inner {
                let (l0, resid) = self.lagrangian(&factors, &lambda, mu);
                let mut g = lambda.clone();
                g.axpy(mu, &resid).unwrap();
                let grad = self.gradient(&factors, &g);
                let gsq: f64 = grad.iter().map(Mat::sum_squares).sum();
                if !gsq.is_finite() || !l0.is_finite() {
                    diverged = true;
                    break 'outer;
                }
                if gsq.sqrt() <= 1e-13 {
                    break;
                }
                step = (step * 2.0).min(1.0);
                loop {
                    let trial: Vec<Mat> = factors
                        .iter()
                        .zip(&grad)
                        .map(|(f, d)| {
                            let mut t = f.clone();
                            t.axpy(-step, d).unwrap();
                            t
                        })
                        .collect();
                    let (l1, r1) = self.lagrangian(&trial, &lambda, mu);
                    if l1 <= l0 - 1e-4 * step * gsq {
                        factors = trial;
                        record(&factors, r1.frobenius_norm(), &mut best_feasible);
                        break;
                    }
                    step *= 0.5;
                    if step < 1e-20 {
                        break;
                    }
                }
                if step < 1e-20 {
                    step = 1e-2;
                    break;
                }
            }
            let (_, resid) = self.lagrangian(&factors, &lambda, mu);
            let rn = resid.frobenius_norm();
            lambda.axpy(mu, &resid).unwrap();
            if rn / target_norm <= 1e-14 {
                break;
            }
            if rn > 0.25 * prev_resid {
                mu = (mu * 10.0).min(1e8);
            }
            prev_resid = rn;
        }
        let resid = product(&factors).sub(&self.target).unwrap();
        RestartOutcome {
            seed: None,
            final_value: self.value(&factors),
            final_residual: resid.frobenius_norm() / target_norm,
            best_feasible,
            diverged,
        }
    }
}

fn product(factors: &[Mat]) -> Mat {
    crate::linalg::chain_product(factors).expect("factors chain")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(SchattenSpec::new(1.0, vec![2.0, 2.0]).is_ok());
        assert!(SchattenSpec::new(1.0, vec![2.0, 3.0]).is_err());
        assert_eq!(SchattenSpec::frobenius(4).unwrap().p(), 0.5);
        assert!(SchattenSpec::new(0.5, vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn depth_one_balanced_is_identity() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(balanced_factorization(&a, 1).unwrap(), vec![a]);
    }

    #[test]
    fn balanced_middle_factors_closed_form() {
        let f = balanced_factorization(&Mat::diag(&[4.0, 1.0]), 4).unwrap();
        let expect = Mat::diag(&[2f64.sqrt(), 1.0]);
        assert!(f[1].max_abs_diff(&expect) <= 1e-15);
        assert!(f[2].max_abs_diff(&expect) <= 1e-15);
    }

    #[test]
    fn balanced_product_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Mat::random_normal(6, 4, 1.0, &mut rng);
        let p = product(&balanced_factorization(&a, 3).unwrap());
        assert!(p.sub(&a).unwrap().frobenius_norm() <= 1e-9 * a.frobenius_norm());
    }

    #[test]
    fn objective_closed_forms() {
        let spec = SchattenSpec::frobenius(2).unwrap();
        let v = factorization_objective(&balanced_factorization(&Mat::diag(&[2.0, 1.0]), 2).unwrap(), &spec).unwrap();
        assert!((v - 3.0).abs() <= 1e-12);
        let spec = SchattenSpec::frobenius(4).unwrap();
        let v = factorization_objective(&balanced_factorization(&Mat::diag(&[4.0, 1.0]), 4).unwrap(), &spec).unwrap();
        assert!((v - 9.0).abs() <= 1e-12);
    }

    #[test]
    fn random_factors_never_beat_the_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for depth in [2usize, 3, 4] {
            let spec = SchattenSpec::frobenius(depth).unwrap();
            for _ in 0..50 {
                let mut f = vec![Mat::random_normal(5, 4, 1.0, &mut rng)];
                for _ in 1..depth {
                    f.push(Mat::random_normal(4, 4, 1.0, &mut rng));
                }
                let v = factorization_objective(&f, &spec).unwrap();
                let s = schatten_norm(&product(&f), spec.p()).unwrap();
                assert!(v >= s - 1e-8, "{v} < {s}");
            }
        }
    }

    #[test]
    fn general_exponents_are_evaluated() {
        // p = 1/2 from p₁ = p₂ = 1: objective = (½(‖R₁‖_* + ‖R₂‖_*))².
        let spec = SchattenSpec::new(0.5, vec![1.0, 1.0]).unwrap();
        let f = vec![Mat::diag(&[2.0, 1.0]), Mat::diag(&[3.0, 1.0])];
        let v = factorization_objective(&f, &spec).unwrap();
        assert!((v - (0.5 * (3.0 + 4.0f64)).powi(2)).abs() <= 1e-12);
    }

    #[test]
    fn identity_nuclear_norm_via_descent() {
        let spec = SchattenSpec::frobenius(2).unwrap();
        let r = verify_prop1(
            &Mat::identity(3),
            &spec,
            &DescentOptions {
                restarts: 2,
                ..DescentOptions::default()
            },
        )
        .unwrap();
        assert!((r.analytic - 3.0).abs() <= 1e-12);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn diagonal_targets_pass_tightly() {
        let spec = SchattenSpec::frobenius(2).unwrap();
        let opts = DescentOptions {
            restarts: 2,
            tol: 1e-3,
            ..DescentOptions::default()
        };
        let r = verify_prop1(&Mat::diag(&[3.0, 1.0, 0.5]), &spec, &opts).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn rejects_non_frobenius_spec() {
        let spec = SchattenSpec::new(0.5, vec![1.0, 1.0]).unwrap();
        assert!(verify_prop1(&Mat::identity(2), &spec, &DescentOptions::default()).is_err());
    }
}
