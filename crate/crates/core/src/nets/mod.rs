//! The three networks: CAM-emitting gaze classifier, residual generators and
//! 70x70 patch discriminators. All are built deterministically from a seed.

mod classifier;
mod discriminator;
mod generator;
mod im2col;
mod layers;
mod params;

pub use classifier::{argmax_rows, ClassifierConfig, ClassifierOutput, FireSpec, GazeClassifier};
pub use discriminator::{DiscriminatorConfig, PatchDiscriminator};
pub use generator::{Generator, GeneratorConfig, OUTPUT_BOUND};
pub use layers::{log_softmax, sigmoid, softmax};
pub use params::{Init, NamedArray, ParamStore};

use serde::{Deserialize, Serialize};

/// Architecture of all networks in a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ModelConfig {
    pub classifier: ClassifierConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
}
