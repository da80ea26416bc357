//! Singular value truncation: rank selection (local, global, iterative),
//! plan application and post-compression fine-tuning.

mod isvt;
mod model;
mod plan;

pub use isvt::{isvt, IsvtOptions, IsvtOutcome, IsvtRound, IsvtStart};
pub use model::{apply_plan, finetune, CompressedModel};
pub use plan::{
    gsvt, lsvt, retained_sv_fraction, spectra, CompressionPlan, Decomposition, PlanParams, RankRule, Scheme,
};
