//! Metrics, evaluation reports, the condition grid, gaze drift, CAM overlays
//! and latency measurement.

mod drift;
mod grid;
mod latency;
mod metrics;
mod overlay;
mod predict;
mod report;

pub use drift::{drift_between, estimate_pupil, gaze_drift, paired_bootstrap, percentile, BootstrapGap, DriftStats};
pub use grid::{condition_grid, ConditionGrid};
pub use latency::{latency_benchmark, LatencyReport, StageTiming, WARMUP_ITERS};
pub use metrics::{confusion_matrix, macro_accuracy, micro_accuracy, ConfusionMatrix};
pub use overlay::{colormap, render_cam_overlay, side_by_side, upsample_bilinear, CamOverlay, OVERLAY_ALPHA};
pub use predict::{argmax, macro_on, predict, predict_probs, translate};
pub use report::{comparison_table, evaluate_model, ConditionMetrics, EvalReport};
