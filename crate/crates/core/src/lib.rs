//! Spatial-spectral classification of hyperspectral images.
//!
//! The pipeline has three stages:
//!
//! 1. **Pre-processing** ([`nsw`], [`pca`]): every pixel is rebuilt as a
//!    correlation-weighted average over the most self-similar sub-window of
//!    its neighbourhood, then the bands are reduced with PCA.
//! 2. **Pixel-wise classification** ([`svc`]): one-against-one nu-SVC with an
//!    RBF kernel, Platt-calibrated and coupled into per-class probability maps.
//! 3. **Smoothing** ([`stv`]): each probability map is denoised with a
//!    smoothed total-variation model solved by ADMM while the training pixels
//!    stay pinned, and the final label is the per-pixel argmax.
//!
//! [`eval`] scores predictions (OA, AA, kappa) and runs the randomized
//! multi-trial protocol; [`pipeline`] wires the stages together from a
//! [`pipeline::PipelineConfig`]; [`io`] reads and writes the cube, label,
//! error-map and report files and generates synthetic scenes.

pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod nsw;
pub mod pca;
pub mod pipeline;
pub mod stv;
pub mod svc;

pub use data::{
    sample_training_set, validate_pair, HsiCube, LabelRaster, ProbabilityTensor, TrainingPixel,
    TrainingSet,
};
pub use error::{Error, Result};
