//! Low-rank induced training for fully-connected networks.
//!
//! Every weight matrix is trained as a product of dense factors under plain
//! weight decay, which acts as a Schatten quasi-norm penalty on the collapsed
//! product and makes its spectrum decay faster. After training the collapsed
//! weights are compressed by singular value truncation (local, global or
//! iterative rank selection).

pub mod checkpoint;
pub mod cli;
pub mod compress;
pub mod data;
pub mod error;
mod fsutil;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{Mat, SvdResult};
