use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use candle_core::Device;
use serde::{Deserialize, Serialize};

use super::metrics::{macro_accuracy, micro_accuracy, ConfusionMatrix};
use super::predict::{argmax, check_channels, EVAL_BATCH};
use crate::dataio::{CaptureCondition, EyeDataset, NUM_ZONES};
use crate::nets::{GazeClassifier, Generator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub n: usize,
    pub micro: f64,
    #[serde(rename = "macro")]
    pub macro_: f64,
}

/// Test metrics of one pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub n: usize,
    pub micro: f64,
    #[serde(rename = "macro")]
    pub macro_: f64,
    pub confusion: ConfusionMatrix,
    /// Keyed by condition label, e.g. `day_wg`.
    pub per_condition: BTreeMap<String, ConditionMetrics>,
    /// Mean per-image milliseconds by stage.
    pub latency_ms: BTreeMap<String, f64>,
    #[serde(skip)]
    pub predictions: Vec<usize>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Writes `<stem>.json` and `<stem>_confusion.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        let csv = dir.join(format!("{stem}_confusion.csv"));
        std::fs::write(&csv, self.confusion.to_csv()).map_err(|e| Error::io(&csv, e))
    }
}

/// Runs the pipeline (optional removal, then classification) over `data`.
pub fn evaluate_model(variant: &str, classifier: &GazeClassifier, generator: Option<&Generator>, data: &EyeDataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_channels(classifier.channels, data.channels)?;
    if let Some(g) = generator {
        check_channels(g.channels, data.channels)?;
    }
    let clf = classifier.with_params(classifier.params.detached());
    let gen = generator.map(|g| g.with_params(g.params.detached()));
    let (mut t_removal, mut t_classifier) = (0f64, 0f64);
    let mut preds = Vec::with_capacity(data.len());
    for chunk in (0..data.len()).collect::<Vec<_>>().chunks(EVAL_BATCH) {
        let mut x = data.batch_tensor(chunk, &Device::Cpu)?;
        if let Some(g) = &gen {
            let t = Instant::now();
            x = g.forward(&x)?;
            let _ = x.sum_all()?.to_scalar::<f32>()?;
            t_removal += t.elapsed().as_secs_f64();
        }
        let t = Instant::now();
        let probs = clf.forward(&x)?.probs.to_vec2::<f32>()?;
        t_classifier += t.elapsed().as_secs_f64();
        preds.extend(probs.iter().map(|p| argmax(p)));
    }
    let labels: Vec<usize> = data.zones.iter().map(|z| z.code()).collect();
    let confusion = ConfusionMatrix::from_indices(NUM_ZONES, &preds, &labels)?;

    let mut per_condition = BTreeMap::new();
    for cond in CaptureCondition::ALL {
        let idx: Vec<usize> = (0..data.len()).filter(|&i| data.conditions[i] == cond).collect();
        if idx.is_empty() {
            continue;
        }
        let p: Vec<usize> = idx.iter().map(|&i| preds[i]).collect();
        let l: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let cm = ConfusionMatrix::from_indices(NUM_ZONES, &p, &l)?;
        per_condition.insert(cond.label(), ConditionMetrics { n: idx.len(), micro: micro_accuracy(&cm)?, macro_: macro_accuracy(&cm)? });
    }
    let n = data.len() as f64;
    let mut latency_ms = BTreeMap::new();
    if gen.is_some() {
        latency_ms.insert("removal".to_string(), t_removal * 1e3 / n);
    }
    latency_ms.insert("classifier".to_string(), t_classifier * 1e3 / n);
    latency_ms.insert("total".to_string(), (t_removal + t_classifier) * 1e3 / n);
    Ok(EvalReport {
        variant: variant.to_string(),
        n: data.len(),
        micro: micro_accuracy(&confusion)?,
        macro_: macro_accuracy(&confusion)?,
        confusion,
        per_condition,
        latency_ms,
        predictions: preds,
    })
}

/// Side-by-side summary of several reports as delimited text.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut conds: Vec<String> = reports.iter().flat_map(|r| r.per_condition.keys().cloned()).collect();
    conds.sort();
    conds.dedup();
    let mut s = String::from("variant,n,micro,macro");
    for c in &conds {
        s.push_str(&format!(",{c}_micro,{c}_macro"));
    }
    s.push('\n');
    for r in reports {
        s.push_str(&format!("{},{},{:.6},{:.6}", r.variant, r.n, r.micro, r.macro_));
        for c in &conds {
            match r.per_condition.get(c) {
                Some(m) => s.push_str(&format!(",{:.6},{:.6}", m.micro, m.macro_)),
                None => s.push_str(",,"),
            }
        }
        s.push('\n');
    }
    s
}
