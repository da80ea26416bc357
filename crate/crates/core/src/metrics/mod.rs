//! Parameter and FLOP accounting, accuracy evaluation, compression sweeps
//! and singular-value spectra.

mod arch;
mod eval;
mod spectrum;

pub use arch::{count_flops, count_params, resnet20, vgg16, ArchDescriptor, ArchLayer};
pub use eval::{evaluate, sweep_curve, write_curve_csv, Classifier, CurvePoint};
pub use spectrum::{spectrum_report, SpectrumReport, SpectrumRow};
