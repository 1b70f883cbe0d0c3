//! Systolic-peak learning toolkit for camera-based rhythm screening.
//!
//! The crate is organised bottom-up:
//!
//! - [`signals`]: series types, peak detection, inter-beat intervals and the
//!   HR/IBI error metrics.
//! - [`losses`]: distribution-distance losses between a predicted peak
//!   distribution and the normalized binary peak train, with gradients.
//! - [`peaknet`]: a small 1D convolutional peak estimator trained with those
//!   losses.
//! - [`synth`]: synthetic labelled rhythm clips (healthy, SR, AF, AFL).
//! - [`hrv`]: the 20 heart-rate-variability features.
//! - [`classify`]: RBF-kernel SVM and subject-independent evaluation.

pub mod classify;
pub mod error;
pub mod hrv;
pub mod losses;
pub mod peaknet;
pub mod rng;
pub mod signals;
pub mod synth;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
