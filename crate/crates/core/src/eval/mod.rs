//! Metrics, baselines, significance testing and report rendering.
//!
//! Metrics are computed one-vs-rest per class with 0/0 taken as 0, and
//! aggregated as support-weighted averages. Rounding happens only when a
//! report is rendered.

mod mcnemar;
mod metrics;
mod report;

pub use mcnemar::{mcnemar, mcnemar_counts, McNemar};
pub use metrics::{
    confusion, f1, macro_overall, majority_baseline, majority_label, random_baseline,
    weighted_overall, ClassCounts, ClassMetrics, ConfusionCounts, Overall,
};
pub use report::{
    display_label, render_report, round2, Baselines, EvalRecord, EvalReport, ReportFormat,
};
