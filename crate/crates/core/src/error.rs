use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("malformed manifest row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("unknown gaze zone code {0} (expected 0-6)")]
    UnknownZoneCode(i64),
    #[error("subject {0:?} has no split assignment")]
    UnassignedSubject(String),
    #[error("landmarks are degenerate (all points coincide)")]
    DegenerateLandmarks,
    #[error("landmark ({x}, {y}) lies outside the {width}x{height} frame")]
    OutOfBounds { x: f32, y: f32, width: u32, height: u32 },
    #[error("image is empty")]
    EmptyImage,
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    BadChannelRequest(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("class count mismatch: {0} vs {1}")]
    NMismatch(usize, usize),
    #[error("score {0} outside [0, 1]")]
    DomainError(f64),
    #[error("gaze zone {0} is absent from the training set")]
    MissingClass(String),
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("channel mismatch: model expects {expected}, data has {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint role mismatch: expected {expected}, found {found}")]
    RoleMismatch { expected: String, found: String },
    #[error("checkpoint config differs in keys: {}", .0.join(", "))]
    ConfigMismatch(Vec<String>),
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("no samples to evaluate")]
    Empty,
    #[error("confusion matrix has no counts")]
    EmptyMatrix,
    #[error("condition set {0} has no samples")]
    EmptyConditionSet(String),
    #[error("checkpoint not found: {0}")]
    MissingCheckpoint(PathBuf),
    #[error("step {step} needs the step-{missing} checkpoint {path}")]
    MissingPrerequisiteCheckpoint { step: u8, missing: u8, path: PathBuf },
    #[error("cannot decode image {path}: {reason}")]
    BadImage { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("tensor error: {0}")]
    Tensor(#[from] candle_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn shape(expected: impl std::fmt::Display, got: impl std::fmt::Display) -> Self {
        Error::ShapeMismatch { expected: expected.to_string(), got: got.to_string() }
    }
}
