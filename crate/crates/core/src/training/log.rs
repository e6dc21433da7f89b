use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One row of the training log. Components that do not apply to a step are 0,
/// except `val_cycle`, which is NaN outside GAN training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub step: String,
    pub epoch: usize,
    pub ce: f64,
    pub adv: f64,
    pub cyc: f64,
    pub identity: f64,
    pub gaze: f64,
    pub d_loss: f64,
    pub val_metric: f64,
    pub val_cycle: f64,
    pub wall_seconds: f64,
}

impl EpochRecord {
    pub fn new(step: &str, epoch: usize) -> Self {
        Self {
            step: step.to_string(),
            epoch,
            ce: 0.0,
            adv: 0.0,
            cyc: 0.0,
            identity: 0.0,
            gaze: 0.0,
            d_loss: 0.0,
            val_metric: 0.0,
            val_cycle: f64::NAN,
            wall_seconds: 0.0,
        }
    }
}

/// Append-only delimited log.
#[derive(Debug, Clone)]
pub struct TrainLog {
    path: PathBuf,
}

impl TrainLog {
    pub fn new(path: &Path) -> Self {
        Self { path: path.to_path_buf() }
    }

    pub fn append(&self, rec: &EpochRecord) -> Result<()> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let fresh = std::fs::metadata(&self.path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        w.serialize(rec).map_err(|e| Error::Config(format!("{}: {e}", self.path.display())))?;
        w.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn read(path: &Path) -> Result<Vec<EpochRecord>> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        r.deserialize().map(|row| row.map_err(|e| Error::Config(format!("{}: {e}", path.display())))).collect()
    }
}
