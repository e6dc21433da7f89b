//! Gaze-zone classification robust to eyeglasses.
//!
//! The crate is organised along the processing pipeline:
//!
//! * [`dataio`] reads manifests, splits subjects, preprocesses eye crops and
//!   renders synthetic paired eye images with known pupil positions.
//! * [`nets`] holds the CAM-emitting gaze classifier, the residual generators
//!   and the 70×70 patch discriminators.
//! * [`losses`] implements every training objective as a differentiable
//!   function of candle tensors.
//! * [`training`] runs classifier pre-training, (gaze-preserving) CycleGAN
//!   training and selective fine-tuning, with checkpointing.
//! * [`eval`] computes accuracies, condition grids, gaze drift, CAM overlays
//!   and latency figures.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod losses;
pub mod nets;
pub mod training;

pub use error::{Error, Result};
