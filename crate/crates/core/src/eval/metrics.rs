use serde::{Deserialize, Serialize};

use crate::dataio::{GazeZone, NUM_ZONES};
use crate::{Error, Result};

/// Square count matrix; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { counts: vec![vec![0; n]; n] }
    }

    /// Builds an `n x n` matrix from class indices.
    pub fn from_indices(n: usize, preds: &[usize], labels: &[usize]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::LengthMismatch(preds.len(), labels.len()));
        }
        if preds.is_empty() {
            return Err(Error::Empty);
        }
        let mut cm = Self::zeros(n);
        for (&p, &t) in preds.iter().zip(labels) {
            if p >= n || t >= n {
                return Err(Error::UnknownZoneCode(p.max(t) as i64));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    /// Adds another matrix of the same size.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n() != self.n() {
            return Err(Error::shape(format!("{0}x{0}", self.n()), format!("{0}x{0}", other.n())));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Delimited block with a header row of predicted-class names.
    pub fn to_csv(&self) -> String {
        let names: Vec<String> = (0..self.n()).map(class_name).collect();
        let mut s = format!("true\\pred,{}\n", names.join(","));
        for (i, row) in self.counts.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            s.push_str(&format!("{},{}\n", names[i], cells.join(",")));
        }
        s
    }
}

fn class_name(i: usize) -> String {
    if i < NUM_ZONES {
        GazeZone::ALL[i].name().to_string()
    } else {
        format!("class{i}")
    }
}

/// Confusion matrix over the seven gaze zones.
pub fn confusion_matrix(preds: &[GazeZone], labels: &[GazeZone]) -> Result<ConfusionMatrix> {
    let p: Vec<usize> = preds.iter().map(|z| z.code()).collect();
    let l: Vec<usize> = labels.iter().map(|z| z.code()).collect();
    ConfusionMatrix::from_indices(NUM_ZONES, &p, &l)
}

/// Fraction of all samples on the diagonal.
pub fn micro_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let trace: u64 = (0..cm.n()).map(|i| cm.counts[i][i]).sum();
    Ok(trace as f64 / total as f64)
}

/// Mean per-class recall; classes without samples are left out.
pub fn macro_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let per_class: Vec<f64> = (0..cm.n())
        .filter_map(|i| {
            let r = cm.row_sum(i);
            (r > 0).then(|| cm.counts[i][i] as f64 / r as f64)
        })
        .collect();
    if per_class.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}
