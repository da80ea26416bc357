//! Dense row-major matrix of `f64`.
//!
//! `data[i * cols + j]` holds entry `(i, j)`. Products go through
//! `matrixmultiply::dgemm`, which runs single-threaded with a fixed
//! accumulation order, so every product is bit-reproducible.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix. Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. Panics on ragged or empty input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        assert!(cols > 0, "from_rows needs at least one column");
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Square diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// I.i.d. zero-mean Gaussian entries with the given standard deviation.
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("standard deviation must be finite and >= 0");
        let mut m = Self::zeros(rows, cols);
        for x in &mut m.data {
            *x = normal.sample(rng);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Rows `indices` gathered in order.
    pub fn select_rows(&self, indices: &[usize]) -> Mat {
        assert!(!indices.is_empty(), "select_rows needs at least one index");
        let mut out = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            out.extend_from_slice(self.row(i));
        }
        Mat {
            rows: indices.len(),
            cols: self.cols,
            data: out,
        }
    }

    /// Contiguous row range `[start, end)`.
    pub fn row_range(&self, start: usize, end: usize) -> Mat {
        assert!(start < end && end <= self.rows, "invalid row range");
        Mat {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// First `k` columns.
    pub fn leading_cols(&self, k: usize) -> Mat {
        assert!(k > 0 && k <= self.cols);
        Mat::from_fn(self.rows, k, |i, j| self.get(i, j))
    }

    /// First `k` rows.
    pub fn leading_rows(&self, k: usize) -> Mat {
        self.row_range(0, k)
    }

    pub fn scaled(&self, c: f64) -> Mat {
        let mut m = self.clone();
        m.scale_in_place(c);
        m
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for x in &mut self.data {
            *x *= c;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Mat) -> Result<()> {
        self.check_same_shape(other, "axpy")?;
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += c * y;
        }
        Ok(())
    }

    fn zip_with(&self, other: &Mat, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        self.check_same_shape(other, op)?;
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    fn check_same_shape(&self, other: &Mat, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sum_squares().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest entry-wise absolute difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        matmul(self, other)
    }
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    out: &mut [f64],
) {
    debug_assert!(out.len() == m * n);
    // SAFETY: the callers guarantee that `a` spans m*k entries addressed by
    // (rsa, csa), `b` spans k*n entries addressed by (rsb, csb), and `out` is
    // a row-major m*n buffer that does not alias either input.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `a · b`.
pub fn matmul(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Mat::zeros(a.rows, b.cols);
    gemm(
        a.rows,
        a.cols,
        b.cols,
        &a.data,
        a.cols as isize,
        1,
        &b.data,
        b.cols as isize,
        1,
        &mut out.data,
    );
    Ok(out)
}

/// `aᵀ · b` without materialising the transpose.
pub fn matmul_tn(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.rows != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul_tn",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Mat::zeros(a.cols, b.cols);
    gemm(
        a.cols,
        a.rows,
        b.cols,
        &a.data,
        1,
        a.cols as isize,
        &b.data,
        b.cols as isize,
        1,
        &mut out.data,
    );
    Ok(out)
}

/// `a · bᵀ` without materialising the transpose.
pub fn matmul_nt(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols != b.cols {
        return Err(Error::DimensionMismatch {
            op: "matmul_nt",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Mat::zeros(a.rows, b.rows);
    gemm(
        a.rows,
        a.cols,
        b.rows,
        &a.data,
        a.cols as isize,
        1,
        &b.data,
        1,
        b.cols as isize,
        &mut out.data,
    );
    Ok(out)
}

/// Left-to-right product of a non-empty chain.
pub fn chain_product(mats: &[Mat]) -> Result<Mat> {
    let (first, rest) = mats
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty matrix chain".into()))?;
    let mut acc = first.clone();
    for m in rest {
        acc = matmul(&acc, m)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(a: &Mat, b: &Mat) -> Mat {
        Mat::from_fn(a.rows(), b.cols(), |i, j| {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            s
        })
    }

    #[test]
    fn identity_times_a_is_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Mat::random_normal(3, 4, 1.0, &mut rng);
        assert_eq!(matmul(&Mat::identity(3), &a).unwrap(), a);
    }

    #[test]
    fn small_hand_product() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Mat::from_rows(&[&[0.0], &[1.0]]);
        assert_eq!(matmul(&a, &b).unwrap(), Mat::from_rows(&[&[2.0], &[4.0]]));
    }

    #[test]
    fn random_product_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Mat::random_normal(5, 7, 1.0, &mut rng);
        let b = Mat::random_normal(7, 3, 1.0, &mut rng);
        let c = matmul(&a, &b).unwrap();
        assert!(c.max_abs_diff(&naive(&a, &b)) <= 1e-12);
    }

    #[test]
    fn transposed_products_match_explicit_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Mat::random_normal(6, 4, 1.0, &mut rng);
        let b = Mat::random_normal(6, 5, 1.0, &mut rng);
        let c = Mat::random_normal(3, 4, 1.0, &mut rng);
        let tn = matmul_tn(&a, &b).unwrap();
        assert!(tn.max_abs_diff(&naive(&a.transpose(), &b)) <= 1e-12);
        let nt = matmul_nt(&a, &c).unwrap();
        assert!(nt.max_abs_diff(&naive(&a, &c.transpose())) <= 1e-12);
    }

    #[test]
    fn dimension_mismatch_names_both_shapes() {
        let err = matmul(&Mat::zeros(2, 3), &Mat::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("matmul"), "{msg}");
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                left: (2, 3),
                right: (2, 3),
                ..
            }
        ));
    }

    #[test]
    fn from_vec_rejects_bad_length_and_zero_dims() {
        assert!(Mat::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Mat::from_vec(0, 2, vec![]).is_err());
    }
}
