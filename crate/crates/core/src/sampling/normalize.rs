use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::TriMesh;
use crate::error::{PasdfError, Result};
use crate::geom::{Aabb, PointCloud};

/// Minimum face area kept after normalization.
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Uniform map `p -> (p - offset) / scale` into the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub scale: f64,
    pub offset: [f64; 3],
}

impl Default for NormalizationRecord {
    fn default() -> Self {
        NormalizationRecord {
            scale: 1.0,
            offset: [0.0; 3],
        }
    }
}

impl NormalizationRecord {
    /// Aspect-preserving record that puts the box's longest side exactly on [0, 1].
    pub fn fit(bounds: &Aabb) -> Result<Self> {
        let ext = bounds.extents();
        let scale = ext.max();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(PasdfError::input("cannot normalize geometry with zero extent"));
        }
        Ok(NormalizationRecord {
            scale,
            offset: [bounds.min.x, bounds.min.y, bounds.min.z],
        })
    }

    /// Like [`fit`](Self::fit) but centered, with the longest side mapped to
    /// `[padding, 1 − padding]`.
    pub fn fit_padded(bounds: &Aabb, padding: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&padding) {
            return Err(PasdfError::param(format!("normalization padding {padding} must lie in [0, 0.5)")));
        }
        let ext = bounds.extents();
        let scale = ext.max() / (1.0 - 2.0 * padding);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(PasdfError::input("cannot normalize geometry with zero extent"));
        }
        let offset = bounds.center().coords - Vector3::repeat(0.5 * scale);
        Ok(NormalizationRecord {
            scale,
            offset: offset.into(),
        })
    }

    fn offset(&self) -> Vector3<f64> {
        Vector3::from(self.offset)
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from((p.coords - self.offset()) / self.scale)
    }

    pub fn invert(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(p.coords * self.scale + self.offset())
    }

    /// Normals are unaffected by a uniform scale plus offset.
    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        let points = cloud.points().iter().map(|p| self.apply(p)).collect();
        PointCloud::from_parts_unchecked(points, cloud.normals().map(|n| n.to_vec()))
    }

    pub fn invert_cloud(&self, cloud: &PointCloud) -> PointCloud {
        let points = cloud.points().iter().map(|p| self.invert(p)).collect();
        PointCloud::from_parts_unchecked(points, cloud.normals().map(|n| n.to_vec()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() || !self.offset.iter().all(|v| v.is_finite()) {
            return Err(PasdfError::input("normalization record must have a positive finite scale"));
        }
        Ok(())
    }
}

/// Scales and shifts a mesh into [0,1]³ with a single scale factor; the longest
/// axis spans exactly [0,1]. Faces that become degenerate are dropped.
pub fn normalize_unit_cube(mesh: &TriMesh) -> Result<(TriMesh, NormalizationRecord)> {
    if mesh.vertices().len() < 4 {
        return Err(PasdfError::input(format!(
            "normalization needs at least 4 vertices, mesh has {}",
            mesh.vertices().len()
        )));
    }
    let record = NormalizationRecord::fit(&mesh.bounds().expect("non-empty"))?;
    let normalized = mesh
        .map_vertices(|p| record.apply(p))
        .without_degenerate_faces(MIN_FACE_AREA);
    Ok((normalized, record))
}

/// Cloud counterpart of [`normalize_unit_cube`].
pub fn normalize_cloud(cloud: &PointCloud) -> Result<(PointCloud, NormalizationRecord)> {
    cloud.ensure_non_empty("normalize_cloud")?;
    let record = NormalizationRecord::fit(&cloud.bounds().expect("non-empty"))?;
    Ok((record.apply_cloud(cloud), record))
}
