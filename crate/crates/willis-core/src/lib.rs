//! Two-step Circle-of-Willis bifurcation landmark detection.
//!
//! Step 1 localizes coarse regions of interest with a small 3D one-stage
//! detector over the full volume; step 2 refines exact landmark coordinates
//! inside 32^3 crops with a residual U-Net regressing Gaussian heatmaps,
//! fused across deep-supervision levels by multiplication. A calibrated
//! peak-intensity threshold decides which landmarks are anatomically
//! missing. Synthetic vascular phantoms with known ground truth provide
//! train/validation/test data end to end.

pub mod annotations;
pub mod calibration;
pub mod detector;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod inference;
pub mod landmarks;
pub mod nifti;
pub mod nn;
pub mod phantom;
pub mod refiner;
pub mod seed;
pub mod volume;

pub use error::{Error, ErrorKind, Result};
