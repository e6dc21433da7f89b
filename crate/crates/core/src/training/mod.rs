//! The three training steps, checkpoints and early stopping.
//!
//! Step 1 trains the gaze classifier on images without glasses. Step 2 trains
//! the two translation generators and their discriminators against the frozen
//! step-1 classifier. Step 3 fine-tunes the classifier on real images without
//! glasses plus glasses-removed images.

mod adam;
mod checkpoint;
mod classifier;
mod config;
mod gan;
mod log;
mod pool;
mod schedule;

use std::path::PathBuf;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CheckpointMeta, Role};
pub use classifier::{finetune_step3, train_classifier_all_data, train_classifier_on, train_classifier_step1, ClassifierRun};
pub use config::{flatten, AdversarialForm, TrainConfig, Variant};
pub use gan::{cycle_error, train_gan_step2, GanData, GanRun, GanTrainer, StepLosses};
pub use log::{EpochRecord, TrainLog};
pub use pool::ImagePool;
pub use schedule::{early_stop_check, epoch_seed, EarlyStop, MIN_IMPROVEMENT};

pub const CLASSIFIER_BETAS: (f64, f64) = (0.9, 0.999);
pub const GAN_BETAS: (f64, f64) = (0.5, 0.999);

/// Where and how a training run persists its state.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Directory for checkpoints and `train_log.csv`; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    /// Base file name for classifier checkpoints.
    pub tag: Option<String>,
    /// Continue from `<name>.last.gpck` files when present.
    pub resume: bool,
    /// Stop after this many epochs in this invocation.
    pub max_epochs: Option<usize>,
}
