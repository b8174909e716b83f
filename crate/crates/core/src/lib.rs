//! Bayesian discrete–continuous emulation of a pixelwise atmospheric
//! correction model.
//!
//! * [`autodiff`]: reverse-mode engine, concrete dropout, Adam.
//! * [`emulator`]: the three network architectures, the two-part loss,
//!   training and Monte-Carlo inference.
//! * [`synth`]: a synthetic teacher model, tile files and patch plumbing.
//! * [`metrics`]: surface reflectance, cloud mask and calibration scores.
//! * [`pipeline`]: the command implementations behind the `emu` binary.

// `!(x > 0.0)` is the intended way to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod emulator;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod synth;
pub mod tensor;

pub use tensor::Tensor;
