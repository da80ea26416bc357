//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of the tall orientation are rotated pairwise in cyclic order
//! until every pair is orthogonal to within `sqrt(m)·eps` relative to the
//! column norms. Singular values are the final column norms.
//!
//! Output conventions:
//! - singular values sorted non-increasing, ties kept in original column order;
//! - the first entry of each `U` column with magnitude above `SIGN_EPS` is
//!   made non-negative and the matching row of `Vᵀ` flipped with it;
//! - columns whose norm underflows are treated as exact zeros and their
//!   singular vectors completed by Gram–Schmidt against the standard basis.

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub const MAX_SWEEPS: usize = 60;
const SIGN_EPS: f64 = 1e-12;

/// Thin SVD `A = U · diag(s) · Vᵀ` with `k = min(m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    u: Mat,
    s: Vec<f64>,
    vt: Mat,
}

impl SvdResult {
    /// Left singular vectors, `m × k`.
    pub fn u(&self) -> &Mat {
        &self.u
    }

    /// Singular values, non-increasing.
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    /// Right singular vectors as rows, `k × n`.
    pub fn vt(&self) -> &Mat {
        &self.vt
    }

    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.rows(), self.vt.cols())
    }

    pub fn into_parts(self) -> (Mat, Vec<f64>, Mat) {
        (self.u, self.s, self.vt)
    }

    /// `U · diag(s) · Vᵀ`.
    pub fn reconstruct(&self) -> Mat {
        let (a, b) = truncate(self, self.k()).expect("full rank is always in range");
        crate::linalg::matmul(&a, &b).expect("factor shapes chain")
    }
}

/// Best rank-`r` factors: `(U_r · diag(s_r), V_rᵀ)`.
pub fn truncate(svd: &SvdResult, r: usize) -> Result<(Mat, Mat)> {
    let k = svd.k();
    if r == 0 || r > k {
        return Err(Error::RankOutOfRange {
            layer: None,
            rank: r,
            max: k,
        });
    }
    let m = svd.u.rows();
    let a = Mat::from_fn(m, r, |i, j| svd.u.get(i, j) * svd.s[j]);
    let b = svd.vt.leading_rows(r);
    Ok((a, b))
}

/// Thin SVD by one-sided Jacobi.
pub fn svd(a: &Mat) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input contains NaN or Inf".into()));
    }
    let (m, n) = a.shape();
    // Work on the tall orientation: `rows >= cols`, columns stored contiguously.
    let tall = m >= n;
    let (tr, tc) = if tall { (m, n) } else { (n, m) };
    // Column j of the tall matrix lives at cols[j*tr .. (j+1)*tr].
    let mut cols = vec![0.0; tr * tc];
    for i in 0..m {
        for j in 0..n {
            let x = a.get(i, j);
            if tall {
                cols[j * tr + i] = x;
            } else {
                cols[i * tr + j] = x;
            }
        }
    }
    let rot = jacobi_sweeps(&mut cols, tr, tc)?;

    // Singular values and ordering.
    let mut norms: Vec<f64> = (0..tc)
        .map(|j| dot(&cols[j * tr..(j + 1) * tr], &cols[j * tr..(j + 1) * tr]).sqrt())
        .collect();
    for s in &mut norms {
        if *s * *s < f64::MIN_POSITIVE {
            *s = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..tc).collect();
    // Stable sort keeps ties in original column order.
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).expect("finite norms"));

    // Normalised side (length tr) and rotation side (length tc), both ordered.
    let mut normalized: Vec<Vec<f64>> = Vec::with_capacity(tc);
    let mut rotated: Vec<Vec<f64>> = Vec::with_capacity(tc);
    let mut s = Vec::with_capacity(tc);
    for &j in &order {
        let sigma = norms[j];
        s.push(sigma);
        let col = &cols[j * tr..(j + 1) * tr];
        if sigma > 0.0 {
            normalized.push(col.iter().map(|x| x / sigma).collect());
        } else {
            normalized.push(Vec::new());
        }
        rotated.push(rot[j * tc..(j + 1) * tc].to_vec());
    }
    complete_orthonormal(&mut normalized, tr);

    // Map back to A's orientation: U columns have length m, V columns length n.
    let (mut ucols, mut vcols) = if tall {
        (normalized, rotated)
    } else {
        (rotated, normalized)
    };
    for (u, v) in ucols.iter_mut().zip(vcols.iter_mut()) {
        if let Some(first) = u.iter().find(|x| x.abs() > SIGN_EPS) {
            if *first < 0.0 {
                u.iter_mut().for_each(|x| *x = -*x);
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    let k = tc;
    let u = Mat::from_fn(m, k, |i, j| ucols[j][i]);
    let vt = Mat::from_fn(k, n, |j, i| vcols[j][i]);
    Ok(SvdResult { u, s, vt })
}

/// Cyclic Jacobi sweeps over the columns of a tall `tr × tc` matrix stored
/// column-contiguous. Returns the accumulated right rotation, also stored
/// column-contiguous (`tc × tc`).
fn jacobi_sweeps(cols: &mut [f64], tr: usize, tc: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; tc * tc];
    for j in 0..tc {
        v[j * tc + j] = 1.0;
    }
    let tol = (tr as f64).sqrt() * f64::EPSILON;
    let mut worst = 0.0_f64;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        worst = 0.0;
        for p in 0..tc.saturating_sub(1) {
            for q in p + 1..tc {
                let (cp, cq) = column_pair(cols, tr, p, q);
                let alpha = dot(cp, cp);
                let beta = dot(cq, cq);
                if alpha < f64::MIN_POSITIVE || beta < f64::MIN_POSITIVE {
                    continue;
                }
                let gamma = dot(cp, cq);
                let rel = gamma.abs() / (alpha.sqrt() * beta.sqrt());
                worst = worst.max(rel);
                if rel <= tol {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cp, cq, c, s);
                let (vp, vq) = column_pair(&mut v, tc, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence {
        sweeps: MAX_SWEEPS,
        residual: worst,
    })
}

#[inline]
fn column_pair(buf: &mut [f64], len: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = buf.split_at_mut(q * len);
    (&mut head[p * len..(p + 1) * len], &mut tail[..len])
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Replaces empty entries with unit vectors orthogonal to all others.
fn complete_orthonormal(vecs: &mut [Vec<f64>], len: usize) {
    let missing: Vec<usize> = (0..vecs.len()).filter(|&i| vecs[i].is_empty()).collect();
    if missing.is_empty() {
        return;
    }
    let mut basis = 0;
    for idx in missing {
        loop {
            assert!(basis < len, "cannot complete orthonormal basis");
            let mut cand = vec![0.0; len];
            cand[basis] = 1.0;
            basis += 1;
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for other in vecs.iter().filter(|o| !o.is_empty()) {
                    let d = dot(&cand, other);
                    for (c, o) in cand.iter_mut().zip(other) {
                        *c -= d * o;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > 1e-8 {
                cand.iter_mut().for_each(|c| *c /= norm);
                vecs[idx] = cand;
                break;
            }
        }
    }
}

/// Schatten p-(quasi-)norm from singular values.
pub fn schatten_from_values(s: &[f64], p: f64) -> f64 {
    s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `(Σ sᵢᵖ)^{1/p}`; `p = 1` is the nuclear norm, `p = 2` the Frobenius norm.
pub fn schatten_norm(a: &Mat, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "schatten exponent must be positive, got {p}"
        )));
    }
    Ok(schatten_from_values(svd(a)?.s(), p))
}
