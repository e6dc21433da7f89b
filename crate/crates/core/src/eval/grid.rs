use serde::{Deserialize, Serialize};

use super::predict::macro_on;
use crate::dataio::{ConditionSet, EyeDataset};
use crate::nets::GazeClassifier;
use crate::{Error, Result};

/// Validation macro accuracy of one model per training condition set (rows)
/// on each validation condition set (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGrid {
    pub rows: Vec<ConditionSet>,
    pub cols: Vec<ConditionSet>,
    pub values: Vec<Vec<f64>>,
}

impl ConditionGrid {
    pub fn get(&self, row: ConditionSet, col: ConditionSet) -> Option<f64> {
        let r = self.rows.iter().position(|s| *s == row)?;
        let c = self.cols.iter().position(|s| *s == col)?;
        Some(self.values[r][c])
    }

    /// Delimited table with `a:day_ng`-style labels, values in percent.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("train\\val");
        for c in &self.cols {
            s.push(',');
            s.push_str(c.label());
        }
        s.push('\n');
        for (r, row) in self.rows.iter().zip(&self.values) {
            s.push_str(r.label());
            for v in row {
                s.push_str(&format!(",{:.4}", v * 100.0));
            }
            s.push('\n');
        }
        s
    }
}

/// Trains one classifier per row set via `train_fn(set, train_subset, val_subset)`
/// and evaluates it on every column set.
pub fn condition_grid<F>(rows: &[ConditionSet], cols: &[ConditionSet], train: &EyeDataset, val: &EyeDataset, mut train_fn: F) -> Result<ConditionGrid>
where
    F: FnMut(ConditionSet, &EyeDataset, &EyeDataset) -> Result<GazeClassifier>,
{
    let val_sets: Vec<EyeDataset> = cols
        .iter()
        .map(|c| {
            let d = val.condition_set(*c);
            if d.is_empty() {
                Err(Error::EmptyConditionSet(c.label().to_string()))
            } else {
                Ok(d)
            }
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(rows.len());
    for r in rows {
        let tr = train.condition_set(*r);
        if tr.is_empty() {
            return Err(Error::EmptyConditionSet(r.label().to_string()));
        }
        let va = val.condition_set(*r);
        if va.is_empty() {
            return Err(Error::EmptyConditionSet(r.label().to_string()));
        }
        let model = train_fn(*r, &tr, &va)?;
        values.push(val_sets.iter().map(|v| macro_on(&model, None, v)).collect::<Result<Vec<_>>>()?);
        log::info!("grid row {} done", r.label());
    }
    Ok(ConditionGrid { rows: rows.to_vec(), cols: cols.to_vec(), values })
}
