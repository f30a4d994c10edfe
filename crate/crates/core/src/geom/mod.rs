//! Point clouds, rigid transforms, spatial indexing and the basic cloud operations
//! every later stage builds on.

mod chamfer;
mod cloud;
mod kdtree;
mod normals;
mod transform;
mod voxel;

pub use chamfer::{chamfer_loss, chamfer_metric, nearest_sq_distances};
pub use cloud::{Aabb, PointCloud};
pub use kdtree::{Neighbor, SpatialIndex};
pub use normals::{estimate_normals, NormalEstimate};
pub use transform::{
    apply_transform, compose, orthonormal_drift, project_to_rotation, rotation_angle, RigidTransform,
    ORTHONORMAL_TOLERANCE,
};
pub use voxel::{voxel_downsample, voxel_key};
