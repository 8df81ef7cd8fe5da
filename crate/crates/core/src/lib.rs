//! Point-of-care cough analysis: detection, phase segmentation, spectral
//! features, sensor fusion and illness classification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod detect;
pub mod dsp;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
