pub mod anomaly;
pub mod error;
pub mod geom;
pub mod io;
pub mod pam;
pub mod repair;
pub mod sampling;
pub mod sdf;
pub mod synth;

pub use error::{PasdfError, Result};
pub use geom::{PointCloud, RigidTransform, SpatialIndex};
pub use sampling::{NormalizationRecord, QuerySample, QueryTier, TriMesh};
