//! Pose alignment: FPFH descriptors, RANSAC coarse registration, ICP refinement
//! and the Chamfer-gated outer loop that chains them.

mod align;
mod fpfh;
mod icp;
mod ransac;
mod rigid_fit;

pub use align::{pose_align, AlignmentResult, PamParams, PamStep, DEFAULT_VOXEL_DIVISOR};
pub use fpfh::{compute_fpfh, feature_bins, pair_features, FpfhDescriptor, BINS_PER_FEATURE, FPFH_DIM};
pub use icp::{icp_refine, IcpResult};
pub use ransac::{match_descriptors, ransac_align, RansacParams, RansacResult};
pub use rigid_fit::fit_rigid;
