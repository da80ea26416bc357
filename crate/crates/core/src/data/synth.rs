use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Per-coordinate noise of each blob.
const BLOB_STD: f64 = 0.05;

/// Gaussian blobs around random centers, clamped to `[0, 1]`.
///
/// While `classes ≤ d` the centers form a regular simplex around the point
/// `0.5·1`, inside a random subspace orthogonal to the all-ones direction,
/// with every pair of centers `separation·σ` apart (σ is the per-coordinate
/// noise). Keeping the center differences orthogonal to `1` leaves the
/// classes separable by bias-free models. With more classes than
/// dimensions the centers sit at random unit directions instead. Examples
/// are interleaved: example `i` belongs to class `i mod classes`.
pub fn synth_blobs(n_per_class: usize, classes: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 || classes == 0 || d == 0 {
        return Err(Error::InvalidArgument(
            "blob counts and dimension must be positive".into(),
        ));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "separation must be finite and non-negative, got {separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets = center_offsets(classes, d, &mut rng);
    let radius = separation * BLOB_STD / std::f64::consts::SQRT_2;

    let total = n_per_class * classes;
    let mut features = Mat::zeros(total, d);
    let mut labels = Vec::with_capacity(total);
    for i in 0..total {
        let k = i % classes;
        let row = features.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            *v = (0.5 + radius * offsets.get(k, j) + BLOB_STD * noise).clamp(0.0, 1.0);
        }
        labels.push(k);
    }
    Dataset::new(features, labels, classes)
}

/// `classes × d` center offsets, pairwise `√2` apart when `classes ≤ d`.
fn center_offsets(classes: usize, d: usize, rng: &mut ChaCha8Rng) -> Mat {
    let mut out = Mat::zeros(classes, d);
    if classes > d {
        for k in 0..classes {
            let v = random_unit(d, &[], rng);
            out.row_mut(k).copy_from_slice(&v);
        }
        return out;
    }
    // Orthonormal u_1..u_{K-1}, all orthogonal to the all-ones direction.
    let mut basis = vec![vec![1.0 / (d as f64).sqrt(); d]];
    for _ in 1..classes {
        let u = random_unit(d, &basis, rng);
        basis.push(u);
    }
    // Vertex k has Helmert coordinates t_k[j-1] for j = 1..K-1.
    for k in 0..classes {
        for (j, u) in basis.iter().enumerate().skip(1) {
            let norm = ((j * (j + 1)) as f64).sqrt();
            let t = match k.cmp(&j) {
                std::cmp::Ordering::Less => 1.0 / norm,
                std::cmp::Ordering::Equal => -(j as f64) / norm,
                std::cmp::Ordering::Greater => 0.0,
            };
            out.row_mut(k).iter_mut().zip(u).for_each(|(o, u)| *o += t * u);
        }
    }
    out
}

/// Random unit vector orthogonal to the orthonormal rows of `against`.
fn random_unit(d: usize, against: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for p in against {
                let dot: f64 = v.iter().zip(p).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(p).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Perceptron with bias; returns training accuracy after `epochs` passes.
    fn perceptron_accuracy(ds: &Dataset, epochs: usize) -> f64 {
        let d = ds.dim();
        let mut w = vec![0.0; d + 1];
        let sign = |y: usize| if y == 0 { -1.0 } else { 1.0 };
        let score = |w: &[f64], x: &[f64]| w[d] + x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        for _ in 0..epochs {
            for i in 0..ds.len() {
                let x = ds.features().row(i);
                let t = sign(ds.labels()[i]);
                if t * score(&w, x) <= 0.0 {
                    w.iter_mut().zip(x).for_each(|(wi, xi)| *wi += t * xi);
                    w[d] += t;
                }
            }
        }
        let correct = (0..ds.len())
            .filter(|&i| sign(ds.labels()[i]) * score(&w, ds.features().row(i)) > 0.0)
            .count();
        correct as f64 / ds.len() as f64
    }

    #[test]
    fn well_separated_blobs_are_linearly_separable() {
        let ds = synth_blobs(200, 2, 2, 10.0, 3).unwrap();
        assert_eq!(perceptron_accuracy(&ds, 1000), 1.0);
    }

    #[test]
    fn same_seed_same_dataset() {
        assert_eq!(
            synth_blobs(10, 3, 5, 4.0, 1).unwrap(),
            synth_blobs(10, 3, 5, 4.0, 1).unwrap()
        );
        assert_ne!(
            synth_blobs(10, 3, 5, 4.0, 1).unwrap(),
            synth_blobs(10, 3, 5, 4.0, 2).unwrap()
        );
    }

    #[test]
    fn zero_separation_means_coincide() {
        let ds = synth_blobs(4000, 2, 3, 0.0, 5).unwrap();
        let mut sums = [[0.0; 3]; 2];
        for i in 0..ds.len() {
            for j in 0..3 {
                sums[ds.labels()[i]][j] += ds.features().get(i, j);
            }
        }
        for j in 0..3 {
            let diff = (sums[0][j] - sums[1][j]) / 4000.0;
            // Standard error of the difference is about 0.05·sqrt(2/4000).
            assert!(diff.abs() < 0.005, "coordinate {j}: {diff}");
        }
    }

    #[test]
    fn centers_are_equidistant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = center_offsets(4, 6, &mut rng);
        for a in 0..4 {
            let s: f64 = c.row(a).iter().sum();
            assert!(s.abs() < 1e-12);
            for b in 0..a {
                let d2: f64 = c.row(a).iter().zip(c.row(b)).map(|(x, y)| (x - y).powi(2)).sum();
                assert!((d2 - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn values_are_in_unit_interval() {
        let ds = synth_blobs(50, 12, 4, 30.0, 0).unwrap();
        assert!(ds.features().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
