use std::collections::BTreeMap;
use std::time::Instant;

use candle_core::Device;
use serde::{Deserialize, Serialize};

use super::drift::percentile;
use crate::dataio::EyeDataset;
use crate::nets::{GazeClassifier, Generator};
use crate::{Error, Result};

/// Iterations discarded before timing starts.
pub const WARMUP_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub mean_ms: f64,
    pub p95_ms: f64,
}

/// Per-image wall-clock time by stage (`removal`, `classifier`, `total`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub batch_size: usize,
    pub iterations: usize,
    pub stages: BTreeMap<String, StageTiming>,
}

fn timing(mut ms: Vec<f64>) -> StageTiming {
    ms.sort_by(f64::total_cmp);
    StageTiming { mean_ms: ms.iter().sum::<f64>() / ms.len() as f64, p95_ms: percentile(&ms, 95.0) }
}

/// Times `n_images` batches through optional removal and the classifier.
pub fn latency_benchmark(
    classifier: &GazeClassifier,
    generator: Option<&Generator>,
    data: &EyeDataset,
    n_images: usize,
    batch_size: usize,
) -> Result<LatencyReport> {
    if n_images < 100 {
        return Err(Error::Config(format!("latency benchmark needs at least 100 iterations, got {n_images}")));
    }
    if data.is_empty() || batch_size == 0 {
        return Err(Error::EmptyDataset);
    }
    let clf = classifier.with_params(classifier.params.detached());
    let gen = generator.map(|g| g.with_params(g.params.detached()));
    let (mut removal, mut classify, mut total) = (Vec::new(), Vec::new(), Vec::new());
    for it in 0..WARMUP_ITERS + n_images {
        let idx: Vec<usize> = (0..batch_size).map(|k| (it * batch_size + k) % data.len()).collect();
        let x = data.batch_tensor(&idx, &Device::Cpu)?;
        let t0 = Instant::now();
        let x = match &gen {
            Some(g) => g.forward(&x)?,
            None => x,
        };
        // Force evaluation before the stage boundary.
        let _ = x.sum_all()?.to_scalar::<f32>()?;
        let t1 = Instant::now();
        let _ = clf.forward(&x)?.probs.sum_all()?.to_scalar::<f32>()?;
        let t2 = Instant::now();
        if it >= WARMUP_ITERS {
            let per = |d: std::time::Duration| d.as_secs_f64() * 1e3 / batch_size as f64;
            removal.push(per(t1 - t0));
            classify.push(per(t2 - t1));
            total.push(per(t2 - t0));
        }
    }
    let mut stages = BTreeMap::new();
    if gen.is_some() {
        stages.insert("removal".to_string(), timing(removal));
    }
    stages.insert("classifier".to_string(), timing(classify));
    stages.insert("total".to_string(), timing(total));
    Ok(LatencyReport { batch_size, iterations: n_images, stages })
}
