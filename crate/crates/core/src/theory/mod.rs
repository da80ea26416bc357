//! Numerical checks of the two facts behind factorized training: weight
//! decay on a depth-N factorization equals a Schatten quasi-norm penalty on
//! the product, and per-layer penalty strengths collapse to a single one in
//! ReLU networks.

mod rescale;
mod schatten;

pub use rescale::{rescale_by, rescale_network, verify_against, verify_prop2, Prop2Report, RescalingSpec};
pub use schatten::{
    balanced_factorization, factorization_objective, verify_prop1, DescentOptions, Prop1Report, RestartOutcome,
    SchattenSpec,
};
