use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::Result;
use crate::linalg::{matmul, schatten_norm, Mat};
use crate::nn::Mlp;
use crate::theory::{
    balanced_factorization, factorization_objective, rescale_by, verify_against, verify_prop1, verify_prop2,
    DescentOptions, RescalingSpec, SchattenSpec,
};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Random `m × n` matrix of the given rank (full when `rank ≥ min(m, n)`).
pub fn random_matrix(m: usize, n: usize, rank: usize, rng: &mut ChaCha8Rng) -> Mat {
    let k = rank.min(m.min(n));
    if k == m.min(n) {
        return Mat::random_normal(m, n, 1.0, rng);
    }
    let l = Mat::random_normal(m, k, 1.0, rng);
    let r = Mat::random_normal(k, n, 1.0, rng);
    matmul(&l, &r).expect("inner dims match")
}

/// Balanced factorizations hit the analytic Schatten value for a spread
/// of shapes and ranks, at depth 2 (nuclear) and depth 4 (`p = 1/2`).
pub fn balanced_suite(count: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = [(6, 4), (8, 8), (10, 6)];
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for i in 0..count {
        let (m, n) = shapes[i % shapes.len()];
        let rank = if i % 2 == 0 { m.min(n) } else { 2 };
        let a = random_matrix(m, n, rank, &mut rng);
        for depth in [2, 4] {
            let spec = SchattenSpec::frobenius(depth)?;
            let analytic = schatten_norm(&a, spec.p())?;
            let value = factorization_objective(&balanced_factorization(&a, depth)?, &spec)?;
            worst = worst.max((value - analytic).abs() / analytic);
            cases += 1;
        }
    }
    Ok(Check {
        name: "balanced factorization".into(),
        pass: worst <= 1e-10,
        detail: format!("{cases} cases, worst relative error {worst:.2e}"),
    })
}

/// Descent from random starts on a rank-3 6×6 target at depth 2.
pub fn descent_check(restarts: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_matrix(6, 6, 3, &mut rng);
    let spec = SchattenSpec::frobenius(2)?;
    let opts = DescentOptions {
        restarts,
        seed,
        tol: 1e-2,
        ..DescentOptions::default()
    };
    let r = verify_prop1(&a, &spec, &opts)?;
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.10}"));
    Ok(Check {
        name: "descent bracketing".into(),
        pass: r.pass,
        detail: format!(
            "nuclear {:.10}, best descent {}, lowest feasible {}",
            r.analytic,
            fmt(r.descent_best),
            fmt(r.lowest_feasible)
        ),
    })
}

fn random_inputs(n: usize, d: usize, classes: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let x = Mat::random_normal(n, d, 1.0, rng);
    let y = (0..n).map(|_| rng.random_range(0..classes)).collect();
    Dataset::new(x, y, classes)
}

/// Rescaling a 3-layer depth-2 network by the single-strength construction
/// keeps outputs and objective, and a broken rescaling is caught.
pub fn rescaling_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Mlp::init(&[12, 10, 8, 5], 2, seed)?;
    let ds = random_inputs(100, 12, 5, &mut rng)?;
    let spec = RescalingSpec::new(vec![1.0, 4.0, 16.0], 2)?;
    let r = verify_prop2(&model, &spec, &ds)?;
    let broken = rescale_by(&model, &[2.0, 1.0, 1.0])?;
    let neg = verify_against(&model, &broken, &spec, &ds)?;
    Ok(vec![
        Check {
            name: "rescaling keeps outputs".into(),
            pass: r.outputs_ok && r.argmax_preserved,
            detail: format!("max |Δlogit| {:.2e}", r.max_output_diff),
        },
        Check {
            name: "rescaling keeps objective".into(),
            pass: r.objectives_ok,
            detail: format!(
                "multi {:.12}, single {:.12}, relative gap {:.2e}",
                r.multi_objective, r.single_objective, r.objective_rel_diff
            ),
        },
        Check {
            name: "broken rescaling detected".into(),
            pass: !neg.outputs_ok,
            detail: format!("max |Δlogit| {:.2e}", neg.max_output_diff),
        },
    ])
}

/// Everything `lorita verify` runs.
pub fn default_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = vec![balanced_suite(20, seed)?, descent_check(5, seed)?];
    checks.extend(rescaling_checks(seed)?);
    Ok(checks)
}
