//! Point scoring by field magnitude, top-K aggregation and AUROC evaluation.

mod metrics;
mod score;

pub use metrics::{auroc, object_score, LabeledScores};
pub use score::{evaluate, score_points, AnomalyReport, DEFAULT_TOP_K};
