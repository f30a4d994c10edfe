use nalgebra::{Matrix3, Matrix4, Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{PasdfError, Result};

/// Orthonormality drift beyond which a rotation is projected back onto SO(3).
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates that `rotation` is orthonormal with determinant +1 (to 1e-6).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let drift = orthonormal_drift(&rotation);
        if !drift.is_finite() || drift > ORTHONORMAL_TOLERANCE || !translation.iter().all(|v| v.is_finite()) {
            return Err(PasdfError::input(format!(
                "rotation is not in SO(3) (drift {drift:e})"
            )));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    /// Projects an arbitrary near-rotation onto SO(3) before building the transform.
    pub fn from_parts_projected(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation: project_to_rotation(&rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        RigidTransform {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    /// Rotation by `angle` about `axis` through `pivot`, followed by `translation`.
    pub fn rotation_about(pivot: &Point3<f64>, axis: &Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let r = *Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).matrix();
        RigidTransform {
            rotation: r,
            translation: pivot.coords - r * pivot.coords + translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn then_after(&self, other: &RigidTransform) -> Self {
        compose(self, other)
    }

    /// Rotation angle in radians, in [0, π].
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    pub fn determinant(&self) -> f64 {
        self.rotation.determinant()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Max absolute entry difference between the two homogeneous matrices.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        (self.to_homogeneous() - other.to_homogeneous()).amax()
    }
}

/// Composition applying `b` first, then `a`. The product rotation is re-projected
/// onto SO(3) whenever its drift exceeds [`ORTHONORMAL_TOLERANCE`].
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    let mut rotation = a.rotation * b.rotation;
    if orthonormal_drift(&rotation) > ORTHONORMAL_TOLERANCE {
        rotation = project_to_rotation(&rotation);
    }
    RigidTransform {
        rotation,
        translation: a.rotation * b.translation + a.translation,
    }
}

pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    let points = cloud.points().iter().map(|p| t.apply_point(p)).collect();
    let normals = cloud
        .normals()
        .map(|ns| ns.iter().map(|n| t.apply_vector(n)).collect());
    PointCloud::from_parts_unchecked(points, normals)
}

/// max(|RᵀR − I|, |det R − 1|).
pub fn orthonormal_drift(r: &Matrix3<f64>) -> f64 {
    let gram = (r.transpose() * r - Matrix3::identity()).amax();
    gram.max((r.determinant() - 1.0).abs())
}

/// Nearest rotation in Frobenius norm (polar decomposition via SVD), with the
/// reflection case folded back into SO(3).
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = u * d * v_t;
    }
    r
}

pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    c.acos()
}
