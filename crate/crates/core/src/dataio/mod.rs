//! Dataset manifests, subject-disjoint splits, eye-crop preprocessing and
//! synthetic paired eye images.

mod batch;
mod dataset;
mod manifest;
mod preprocess;
pub mod synth;
mod zone;

pub use batch::{batch_iter, index_batches, BatchIter};
pub use dataset::{prepare, EyeDataset, PreprocessConfig};
pub use manifest::{load_manifest, split_by_subject, subjects, write_manifest, SampleRecord, Split, SplitRecords};
pub use preprocess::{
    crop_eye_region, equalize_adaptive, equalize_adaptive_with, eye_crop_box, resize_bilinear, to_model_input,
    to_model_input_sized, ClaheParams, CropBox, Depth, EyeImage, EyePixels, Raster, MODEL_INPUT_SIZE,
};
pub use synth::{synth_pair, SynthPair, SyntheticSpec};
pub use zone::{CaptureCondition, ConditionSet, Domain, Eyewear, GazeZone, Lighting, NUM_ZONES};
