//! Mesh preparation and training-query generation: unit-cube normalization,
//! watertightness screening, surface sampling, and signed-distance labels.

mod mesh;
mod normalize;
mod queries;
mod surface;
mod watertight;

pub use mesh::TriMesh;
pub use normalize::{normalize_cloud, normalize_unit_cube, NormalizationRecord, MIN_FACE_AREA};
pub use queries::{
    label_sdf, sample_queries, signed_distances, QueryConfig, QuerySample, QueryTier, SurfaceSource,
};
pub use surface::{barycentric, sample_surface, sample_surface_with_faces, SurfaceSamples};
pub use watertight::{check_watertight, WatertightReport};
