use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::predict::translate;
use crate::dataio::synth::CANVAS;
use crate::dataio::{EyeDataset, EyePixels};
use crate::nets::Generator;
use crate::Result;

/// Fraction of the gap between the darkest value and the median that still
/// counts as pupil.
const PUPIL_LEVEL: f32 = 0.4;

/// Pupil centre in canvas coordinates: intensity-weighted centroid of the
/// 8-connected dark blob that contains the darkest pixel. `None` when the
/// image has no contrast.
pub fn estimate_pupil(px: &EyePixels) -> Option<(f32, f32)> {
    let s = px.size;
    let n = s * s;
    let gray: Vec<f32> = (0..n).map(|i| (0..px.channels).map(|c| px.plane(c)[i]).sum::<f32>() / px.channels as f32).collect();
    let (imin, &vmin) = gray.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let mut sorted = gray.clone();
    sorted.sort_by(f32::total_cmp);
    let median = sorted[n / 2];
    if median - vmin <= 1e-6 {
        return None;
    }
    let thr = vmin + PUPIL_LEVEL * (median - vmin);

    let mut seen = vec![false; n];
    let mut stack = vec![imin];
    seen[imin] = true;
    let (mut sw, mut sx, mut sy) = (0f64, 0f64, 0f64);
    while let Some(i) = stack.pop() {
        let (x, y) = (i % s, i / s);
        let w = (thr - gray[i]) as f64;
        sw += w;
        sx += w * x as f64;
        sy += w * y as f64;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= s as i64 || ny >= s as i64 {
                    continue;
                }
                let j = ny as usize * s + nx as usize;
                if !seen[j] && gray[j] < thr {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    if sw <= 0.0 {
        return None;
    }
    let scale = CANVAS as f64 / s as f64;
    let to_canvas = |c: f64| ((c + 0.5) * scale - 0.5) as f32;
    Some((to_canvas(sx / sw), to_canvas(sy / sw)))
}

/// Summary of per-image pupil displacement, in canvas pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    /// Images where no pupil could be located in the reconstruction or the input.
    pub not_found: usize,
    /// Mean distance between the estimate on the input and the rendered pupil
    /// centre; a property of the estimator, not the generators.
    pub estimator_error: Option<f64>,
    /// Per-image drift, `NaN` where not found.
    pub drifts: Vec<f64>,
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn dist(a: (f32, f32), b: (f32, f32)) -> f64 {
    (((a.0 - b.0) as f64).powi(2) + ((a.1 - b.1) as f64).powi(2)).sqrt()
}

/// Drift between the pupil found on each reference image and on its counterpart.
pub fn drift_between(reference: &EyeDataset, moved: &EyeDataset) -> DriftStats {
    let mut drifts = Vec::with_capacity(reference.len());
    let mut gt_err = Vec::new();
    for i in 0..reference.len() {
        let a = estimate_pupil(&reference.pixels(i));
        let b = estimate_pupil(&moved.pixels(i));
        if let (Some(a), Some(gt)) = (a, reference.pupils.get(i).copied().flatten()) {
            gt_err.push(dist(a, gt));
        }
        drifts.push(match (a, b) {
            (Some(a), Some(b)) => dist(a, b),
            _ => f64::NAN,
        });
    }
    let mut found: Vec<f64> = drifts.iter().copied().filter(|d| !d.is_nan()).collect();
    found.sort_by(f64::total_cmp);
    let mean = if found.is_empty() { f64::NAN } else { found.iter().sum::<f64>() / found.len() as f64 };
    DriftStats {
        n: found.len(),
        mean,
        median: percentile(&found, 50.0),
        p95: percentile(&found, 95.0),
        not_found: drifts.len() - found.len(),
        estimator_error: (!gt_err.is_empty()).then(|| gt_err.iter().sum::<f64>() / gt_err.len() as f64),
        drifts,
    }
}

/// Pupil drift of the full cycle `G_ng(G_wg(x))` on images without glasses.
/// The reference position is the estimate on the input image, so the
/// estimator's own bias cancels.
pub fn gaze_drift(g_wg: &Generator, g_ng: &Generator, data: &EyeDataset) -> Result<DriftStats> {
    let rec = translate(g_ng, &translate(g_wg, data)?)?;
    Ok(drift_between(data, &rec))
}

/// Paired bootstrap of `mean(a - b)` over samples where both are finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapGap {
    pub n: usize,
    pub mean_gap: f64,
    /// 5th percentile of resampled means: one-sided 95% lower bound.
    pub lower_95: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> BootstrapGap {
    let gaps: Vec<f64> = a.iter().zip(b).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| x - y).collect();
    let n = gaps.len();
    if n == 0 {
        return BootstrapGap { n, mean_gap: f64::NAN, lower_95: f64::NAN, ci_low: f64::NAN, ci_high: f64::NAN };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| (0..n).map(|_| gaps[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    BootstrapGap {
        n,
        mean_gap: gaps.iter().sum::<f64>() / n as f64,
        lower_95: percentile(&means, 5.0),
        ci_low: percentile(&means, 2.5),
        ci_high: percentile(&means, 97.5),
    }
}
