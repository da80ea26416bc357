//! Factorized fully-connected networks and convolution forward paths.

mod conv;
mod dense;
mod mlp;

pub use conv::{conv_forward, fold4, lowrank_conv_forward, mode4_unfold, ConvKernel, LowRankConv, Tensor3};
pub use dense::{collapse, factor_stds, init_factorized, FactorizedDense};
pub use mlp::{cross_entropy, softmax_ce, BatchActivations, Gradients, Mlp};
