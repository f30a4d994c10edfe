//! The Chamfer-gated coarse-to-fine alignment loop.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::fpfh::compute_fpfh;
use super::icp::icp_with_index;
use super::ransac::{ransac_align, RansacParams};
use crate::error::{PasdfError, Result};
use crate::geom::{
    apply_transform, chamfer_loss, compose, estimate_normals, voxel_downsample, PointCloud, RigidTransform,
    SpatialIndex,
};

/// Voxel edge used when none is configured: target bounding-box diagonal / 40.
pub const DEFAULT_VOXEL_DIVISOR: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PamParams {
    /// Voxel edge; `None` derives it from the target's bounding-box diagonal.
    pub voxel_size: Option<f64>,
    pub tau: f64,
    pub delta_tau: f64,
    pub max_iterations: usize,
    /// FPFH radius as a multiple of the voxel edge.
    pub fpfh_radius_factor: f64,
    /// RANSAC inlier distance as a multiple of the voxel edge.
    pub ransac_distance_factor: f64,
    pub ransac_max_iterations: usize,
    pub ransac_sample_size: usize,
    pub ransac_edge_length_ratio: f64,
    pub ransac_confidence: f64,
    pub icp_max_iterations: usize,
    pub icp_tolerance: f64,
    /// Neighbours used to estimate normals of the downsampled clouds.
    pub normal_neighbors: usize,
    /// Evaluate the Chamfer gate on the downsampled pair (otherwise on full clouds).
    pub chamfer_on_downsampled: bool,
    pub seed: u64,
}

impl Default for PamParams {
    fn default() -> Self {
        PamParams {
            voxel_size: None,
            tau: 0.016,
            delta_tau: 0.001,
            max_iterations: 10,
            fpfh_radius_factor: 5.0,
            ransac_distance_factor: 1.5,
            ransac_max_iterations: 100_000,
            ransac_sample_size: 3,
            ransac_edge_length_ratio: 0.9,
            ransac_confidence: 0.999,
            icp_max_iterations: 60,
            icp_tolerance: 1e-10,
            normal_neighbors: 20,
            chamfer_on_downsampled: true,
            seed: 0,
        }
    }
}

impl PamParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(PasdfError::param("PAM tau must be positive"));
        }
        if !(self.delta_tau >= 0.0) {
            return Err(PasdfError::param("PAM delta_tau must be non-negative"));
        }
        if self.max_iterations < 1 {
            return Err(PasdfError::param("PAM max_iterations must be at least 1"));
        }
        if let Some(v) = self.voxel_size {
            if !(v > 0.0) {
                return Err(PasdfError::param("PAM voxel_size must be positive"));
            }
        }
        if !(self.fpfh_radius_factor > 0.0 && self.ransac_distance_factor > 0.0) {
            return Err(PasdfError::param("PAM radius factors must be positive"));
        }
        if self.normal_neighbors < 3 {
            return Err(PasdfError::param("PAM normal_neighbors must be at least 3"));
        }
        self.ransac(1.0).validate()
    }

    fn ransac(&self, voxel: f64) -> RansacParams {
        RansacParams {
            max_iterations: self.ransac_max_iterations,
            sample_size: self.ransac_sample_size,
            distance_threshold: self.ransac_distance_factor * voxel,
            edge_length_ratio: self.ransac_edge_length_ratio,
            confidence: self.ransac_confidence,
        }
    }
}

/// One pass of the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PamStep {
    pub ransac: RigidTransform,
    /// ICP correction applied after the coarse transform.
    pub icp: RigidTransform,
    pub chamfer: f64,
    /// Threshold the step's loss was compared against.
    pub tau: f64,
    pub coarse_failed: bool,
}

impl PamStep {
    /// `icp ∘ ransac`: this step's contribution to the cumulative transform.
    pub fn transform(&self) -> RigidTransform {
        compose(&self.icp, &self.ransac)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// `cumulative` applied to the source.
    pub aligned: PointCloud,
    pub cumulative: RigidTransform,
    pub final_chamfer: f64,
    pub initial_chamfer: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Number of steps composed into `cumulative` (0 means the untransformed source won).
    pub best_iteration: usize,
    pub steps: Vec<PamStep>,
    pub final_tau: f64,
}

fn downsample_with_normals(cloud: &PointCloud, voxel: f64, k: usize) -> Result<PointCloud> {
    let down = voxel_downsample(&cloud.without_normals(), voxel)?;
    if down.len() < k.max(3) {
        return Ok(down);
    }
    let center = down.centroid().expect("non-empty");
    Ok(estimate_normals(&down, k, &center)?.cloud)
}

fn gate_loss(
    aligned_src: &PointCloud,
    tgt: &PointCloud,
    tgt_down: &PointCloud,
    voxel: f64,
    on_downsampled: bool,
) -> Result<f64> {
    if on_downsampled {
        chamfer_loss(&voxel_downsample(&aligned_src.without_normals(), voxel)?, tgt_down)
    } else {
        chamfer_loss(aligned_src, tgt)
    }
}

/// Registers `src` onto `tgt`: per iteration downsample, describe with FPFH,
/// coarse-align with RANSAC, refine with ICP on the full clouds, and accumulate
/// `T ← T_icp · T_ransac · T`. Stops when the Chamfer loss drops below the
/// current threshold, which otherwise loosens by `delta_tau` each pass. Returns
/// the lowest-loss state seen, the untransformed source included.
pub fn pose_align(src: &PointCloud, tgt: &PointCloud, params: &PamParams) -> Result<AlignmentResult> {
    params.validate()?;
    src.ensure_non_empty("pose_align source")?;
    tgt.ensure_non_empty("pose_align target")?;
    let voxel = match params.voxel_size {
        Some(v) => v,
        None => {
            let diag = tgt.bounds().expect("non-empty").diagonal();
            if diag > 0.0 {
                diag / DEFAULT_VOXEL_DIVISOR
            } else {
                1.0
            }
        }
    };
    let k_normals = params.normal_neighbors;
    let tgt_down = downsample_with_normals(tgt, voxel, k_normals)?;
    let tgt_full_index = SpatialIndex::new(tgt.points());
    let tgt_fpfh = if tgt_down.has_normals() {
        Some(compute_fpfh(&tgt_down, params.fpfh_radius_factor * voxel)?)
    } else {
        None
    };
    let ransac_params = params.ransac(voxel);

    let initial_chamfer = gate_loss(src, tgt, &tgt_down, voxel, params.chamfer_on_downsampled)?;
    let mut best = (initial_chamfer, RigidTransform::identity(), 0usize);
    let mut cumulative = RigidTransform::identity();
    let mut tau = params.tau;
    let mut steps = Vec::new();
    let mut converged = false;

    for k in 1..=params.max_iterations {
        let current = apply_transform(&cumulative, src);
        let src_down = downsample_with_normals(&current, voxel, k_normals)?;

        let coarse = match (&tgt_fpfh, src_down.has_normals()) {
            (Some(f_tgt), true) => {
                let f_src = compute_fpfh(&src_down, params.fpfh_radius_factor * voxel)?;
                let seed = params.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64);
                ransac_align(&src_down, &tgt_down, &f_src, f_tgt, &ransac_params, seed)
            }
            _ => Err(PasdfError::CoarseAlignmentFailed {
                found: src_down.len().min(tgt_down.len()),
                required: params.ransac_sample_size,
            }),
        };
        let (t_ransac, coarse_failed) = match coarse {
            Ok(r) => {
                debug!(
                    "pam iteration {k}: ransac {} / {} inliers after {} hypotheses",
                    r.inliers, r.correspondences, r.iterations
                );
                (r.transform, false)
            }
            Err(PasdfError::CoarseAlignmentFailed { found, required }) => {
                warn!("pam iteration {k}: coarse alignment failed ({found} < {required}), using identity");
                (RigidTransform::identity(), true)
            }
            Err(e) => return Err(e),
        };

        let icp = icp_with_index(
            current.points(),
            &tgt_full_index,
            &t_ransac,
            params.icp_max_iterations,
            params.icp_tolerance,
        )?;
        // ICP returns the full motion including its seed; peel the seed off so the
        // step factors as icp · ransac.
        let t_icp = compose(&icp.transform, &t_ransac.inverse());
        let step_transform = compose(&t_icp, &t_ransac);
        cumulative = compose(&step_transform, &cumulative);

        let aligned = apply_transform(&cumulative, src);
        let loss = gate_loss(&aligned, tgt, &tgt_down, voxel, params.chamfer_on_downsampled)?;
        steps.push(PamStep {
            ransac: t_ransac,
            icp: t_icp,
            chamfer: loss,
            tau,
            coarse_failed,
        });
        if loss <= best.0 {
            best = (loss, cumulative, k);
        }
        if loss < tau {
            converged = true;
            break;
        }
        tau += params.delta_tau;
    }
    let iterations_used = steps.len();
    let (final_chamfer, best_transform, best_iteration) = best;
    Ok(AlignmentResult {
        aligned: apply_transform(&best_transform, src),
        cumulative: best_transform,
        final_chamfer,
        initial_chamfer,
        iterations_used,
        converged: converged || final_chamfer < tau,
        best_iteration,
        steps,
        final_tau: tau,
    })
}
