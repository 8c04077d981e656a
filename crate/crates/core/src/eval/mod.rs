//! Landmark error metrics and report files.

mod metrics;
mod report;

pub use metrics::{
    auc, ced, ced_at, failure_rate, heatmap_error, nme, nme_with, normalizer, threshold_grid, NormalizationKind,
    DEFAULT_THRESHOLD,
};
pub use report::{ced_svg, evaluate, summary_csv, MetricsReport, NormalizedMetrics, CED_STEPS};
