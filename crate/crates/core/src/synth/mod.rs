//! Parametric normal shapes, synthetic defects and benchmark case assembly.

mod anomaly;
mod bench;
mod shapes;

pub use anomaly::{inject_anomaly, AnomalyKind, AnomalySpec};
pub use bench::{bbox_diagonal, bench_cases, canonical_cloud, pose_error, random_pose, BenchCase, BenchConfig, CaseRole};
pub use shapes::{generate_shape, ShapeKind, ShapeSpec};
