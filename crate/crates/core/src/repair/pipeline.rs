use serde::{Deserialize, Serialize};

use super::marching_cubes::{marching_cubes_values, GridSpec};
use crate::error::{PasdfError, Result};
use crate::geom::{apply_transform, Aabb, PointCloud, RigidTransform};
use crate::pam::{pose_align, AlignmentResult, PamParams};
use crate::sampling::{sample_surface, TriMesh};
use crate::sdf::SdfField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairConfig {
    pub grid_resolution: usize,
    /// Grid covers the unit cube clipped to the aligned input's bbox scaled by this.
    pub bbox_expand: f64,
    /// Points sampled from the repaired surface; `None` matches the input size.
    pub n_points: Option<usize>,
    pub seed: u64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            grid_resolution: 128,
            bbox_expand: 1.3,
            n_points: None,
            seed: 0,
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<()> {
        GridSpec::unit(self.grid_resolution).validate()?;
        if !(self.bbox_expand > 0.0) {
            return Err(PasdfError::param("repair bbox_expand must be positive"));
        }
        if self.n_points == Some(0) {
            return Err(PasdfError::param("repair n_points must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RepairOutcome {
    /// Repaired points in the canonical frame.
    pub cloud: PointCloud,
    /// Extracted zero level set in the canonical frame.
    pub mesh: TriMesh,
    /// Maps canonical-frame results back onto the scan.
    pub to_scan: RigidTransform,
    /// The input after alignment (canonical frame).
    pub aligned_input: PointCloud,
    pub alignment: Option<AlignmentResult>,
    pub grid: GridSpec,
}

impl RepairOutcome {
    pub fn converged(&self) -> bool {
        self.alignment.as_ref().is_none_or(|a| a.converged)
    }
}

/// Zero level set of the field over `grid` (normalized frame).
pub fn extract_surface(field: &SdfField, grid: &GridSpec) -> Result<TriMesh> {
    grid.validate()?;
    let values = field.eval_normalized(&grid.points())?;
    marching_cubes_values(&values, grid, 0.0)
}

/// Grid bounds for a normalized cloud: the unit cube clipped to its expanded bbox.
pub fn repair_grid(normalized: &PointCloud, resolution: usize, bbox_expand: f64) -> GridSpec {
    let unit = Aabb {
        min: nalgebra::Point3::origin(),
        max: nalgebra::Point3::new(1.0, 1.0, 1.0),
    };
    let bounds = normalized
        .bounds()
        .and_then(|b| b.scaled(bbox_expand).intersect(&unit))
        .filter(|b| (0..3).all(|a| b.max[a] > b.min[a]))
        .unwrap_or(unit);
    GridSpec::with_bounds(resolution, &bounds)
}

/// Aligns the scan to the canonical pose (skipped when `pam` is `None`),
/// extracts the learned zero level set, and samples the repaired surface.
pub fn repair(
    anomalous: &PointCloud,
    field: &SdfField,
    canonical: &PointCloud,
    cfg: &RepairConfig,
    pam: Option<&PamParams>,
) -> Result<RepairOutcome> {
    cfg.validate()?;
    anomalous.ensure_non_empty("repair input")?;
    let alignment = pam.map(|p| pose_align(anomalous, canonical, p)).transpose()?;
    let transform = alignment.as_ref().map_or_else(RigidTransform::identity, |a| a.cumulative);
    let aligned_input = apply_transform(&transform, anomalous);

    let normalized = field.normalization.apply_cloud(&aligned_input);
    let grid = repair_grid(&normalized, cfg.grid_resolution, cfg.bbox_expand);
    let surface = extract_surface(field, &grid)?;
    if surface.is_empty() {
        return Err(PasdfError::RepairFailed(
            "the learned field has no zero crossing inside the repair grid".into(),
        ));
    }
    let mesh = surface.map_vertices(|p| field.normalization.invert(p));
    let n = cfg.n_points.unwrap_or(anomalous.len());
    let cloud = sample_surface(&mesh, n, cfg.seed).map_err(|e| PasdfError::RepairFailed(e.to_string()))?;
    Ok(RepairOutcome {
        cloud,
        mesh,
        to_scan: transform.inverse(),
        aligned_input,
        alignment,
        grid,
    })
}
