use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_nt, svd, truncate, Mat};

/// `H × W × D` image, stored with index `(x·W + y)·D + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    h: usize,
    w: usize,
    d: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(h: usize, w: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || d == 0 {
            return Err(Error::InvalidShape(format!(
                "tensor dims must be positive, got {h}x{w}x{d}"
            )));
        }
        if data.len() != h * w * d {
            return Err(Error::InvalidShape(format!(
                "{h}x{w}x{d} tensor needs {} values, got {}",
                h * w * d,
                data.len()
            )));
        }
        Ok(Self { h, w, d, data })
    }

    pub fn zeros(h: usize, w: usize, d: usize) -> Self {
        Self::new(h, w, d, vec![0.0; h * w * d]).expect("positive dims")
    }

    pub fn random_normal<R: Rng + ?Sized>(h: usize, w: usize, d: usize, rng: &mut R) -> Self {
        let data = (0..h * w * d).map(|_| rng.sample(StandardNormal)).collect();
        Self::new(h, w, d, data).expect("positive dims")
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.d)
    }

    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.data[(x * self.w + y) * self.d + k]
    }

    pub fn set(&mut self, x: usize, y: usize, k: usize, v: f64) {
        self.data[(x * self.w + y) * self.d + k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims(), other.dims(), "tensor shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    /// Pixels as rows: `(H·W) × D`.
    fn as_pixel_matrix(&self) -> Mat {
        Mat::from_vec(self.h * self.w, self.d, self.data.clone()).expect("positive dims")
    }

    fn from_pixel_matrix(h: usize, w: usize, m: Mat) -> Self {
        let d = m.cols();
        Self::new(h, w, d, m.into_vec()).expect("matching dims")
    }
}

/// `F_H × F_W × F_D × M` kernel, stored with index `((i·F_W + j)·F_D + k)·M + m`.
///
/// With this layout the row-major data is already the mode-4 unfolding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl ConvKernel {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "kernel dims must be positive, got {dims:?}"
            )));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::InvalidShape(format!(
                "kernel {dims:?} needs {len} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel entries".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Self::new(dims, vec![0.0; dims.iter().product()]).expect("positive dims")
    }

    pub fn random_normal<R: Rng + ?Sized>(dims: [usize; 4], rng: &mut R) -> Self {
        let data = (0..dims.iter().product::<usize>())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Self::new(dims, data).expect("positive dims")
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    fn index(&self, i: usize, j: usize, k: usize, m: usize) -> usize {
        let [_, fw, fd, mm] = self.dims;
        ((i * fw + j) * fd + k) * mm + m
    }

    pub fn get(&self, i: usize, j: usize, k: usize, m: usize) -> f64 {
        self.data[self.index(i, j, k, m)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, m: usize, v: f64) {
        let idx = self.index(i, j, k, m);
        self.data[idx] = v;
    }
}

/// `(F_H·F_W·F_D) × M` matrix whose column `m` is filter `m` flattened in
/// `(i, j, k)` lexicographic order.
pub fn mode4_unfold(kernel: &ConvKernel) -> Mat {
    let [fh, fw, fd, m] = kernel.dims;
    Mat::from_vec(fh * fw * fd, m, kernel.data.clone()).expect("positive dims")
}

/// Inverse of [`mode4_unfold`].
pub fn fold4(mat: &Mat, dims: [usize; 4]) -> Result<ConvKernel> {
    let [fh, fw, fd, m] = dims;
    if mat.shape() != (fh * fw * fd, m) {
        return Err(Error::InvalidShape(format!(
            "cannot fold a {}x{} matrix into a {dims:?} kernel",
            mat.rows(),
            mat.cols()
        )));
    }
    ConvKernel::new(dims, mat.as_slice().to_vec())
}

/// Output spatial size for a valid stride-1 convolution.
fn output_size(input: &Tensor3, fh: usize, fw: usize, fd: usize) -> Result<(usize, usize)> {
    let (h, w, d) = input.dims();
    if d != fd {
        return Err(Error::InvalidShape(format!(
            "input has {d} channels but the kernel expects {fd}"
        )));
    }
    if fh > h || fw > w {
        return Err(Error::InvalidShape(format!(
            "{fh}x{fw} kernel does not fit a {h}x{w} input"
        )));
    }
    Ok((h - fh + 1, w - fw + 1))
}

/// `(H'·W') × (F_H·F_W·F_D)` patch matrix, rows in output-pixel order and
/// columns in the same order as [`mode4_unfold`] rows.
fn im2col(input: &Tensor3, fh: usize, fw: usize, ho: usize, wo: usize) -> Mat {
    let (_, w, d) = input.dims();
    let cols = fh * fw * d;
    let mut out = Mat::zeros(ho * wo, cols);
    for x in 0..ho {
        for y in 0..wo {
            let row = out.row_mut(x * wo + y);
            for i in 0..fh {
                let src = ((x + i) * w + y) * d;
                let dst = i * fw * d;
                row[dst..dst + fw * d].copy_from_slice(&input.data[src..src + fw * d]);
            }
        }
    }
    out
}

/// Valid, stride-1 convolution `O(x,y,m) = Σ_{i,j,k} I(x+i, y+j, k)·K(i,j,k,m)`.
pub fn conv_forward(input: &Tensor3, kernel: &ConvKernel) -> Result<Tensor3> {
    let [fh, fw, fd, _] = kernel.dims;
    let (ho, wo) = output_size(input, fh, fw, fd)?;
    let patches = im2col(input, fh, fw, ho, wo);
    let out = matmul(&patches, &mode4_unfold(kernel))?;
    Ok(Tensor3::from_pixel_matrix(ho, wo, out))
}

/// Convolution kernel stored as `r` filters `L` plus a channel mix `R ∈ ℝ^{M×r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankConv {
    l_tensor: ConvKernel,
    r_mat: Mat,
}

impl LowRankConv {
    pub fn new(l_tensor: ConvKernel, r_mat: Mat) -> Result<Self> {
        let [fh, fw, fd, r] = l_tensor.dims();
        if r_mat.cols() != r {
            return Err(Error::InvalidShape(format!(
                "L holds {r} filters but R has {} columns",
                r_mat.cols()
            )));
        }
        let max = (fh * fw * fd).min(r_mat.rows());
        if r > max {
            return Err(Error::RankOutOfRange {
                layer: None,
                rank: r,
                max,
            });
        }
        Ok(Self { l_tensor, r_mat })
    }

    /// Rank-`r` decomposition of `kernel` from the SVD of its unfolding.
    pub fn from_kernel(kernel: &ConvKernel, r: usize) -> Result<Self> {
        let [fh, fw, fd, _] = kernel.dims();
        let (a, b) = truncate(&svd(&mode4_unfold(kernel))?, r)?;
        let l_tensor = fold4(&a, [fh, fw, fd, r])?;
        Self::new(l_tensor, b.transpose())
    }

    pub fn rank(&self) -> usize {
        self.r_mat.cols()
    }

    pub fn l_tensor(&self) -> &ConvKernel {
        &self.l_tensor
    }

    pub fn r_mat(&self) -> &Mat {
        &self.r_mat
    }

    /// The full kernel this decomposition represents.
    pub fn to_kernel(&self) -> ConvKernel {
        let [fh, fw, fd, _] = self.l_tensor.dims();
        let full = matmul_nt(&mode4_unfold(&self.l_tensor), &self.r_mat).expect("rank matches");
        fold4(&full, [fh, fw, fd, self.r_mat.rows()]).expect("shape matches")
    }
}

/// Convolution with the `r` filters of `L`, then a per-pixel mix by `R`.
pub fn lowrank_conv_forward(input: &Tensor3, lrc: &LowRankConv) -> Result<Tensor3> {
    let mid = conv_forward(input, &lrc.l_tensor)?;
    let (ho, wo, _) = mid.dims();
    let out = matmul_nt(&mid.as_pixel_matrix(), &lrc.r_mat)?;
    Ok(Tensor3::from_pixel_matrix(ho, wo, out))
}
