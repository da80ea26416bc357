//! Dense matrix algebra: products, SVD, truncation and Schatten norms.

mod mat;
mod svd;

pub use mat::{chain_product, matmul, matmul_nt, matmul_tn, Mat};
pub use svd::{schatten_from_values, schatten_norm, svd, truncate, SvdResult, MAX_SWEEPS};
