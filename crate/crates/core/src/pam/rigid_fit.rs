use nalgebra::{Matrix3, Point3, Vector3};

use crate::geom::RigidTransform;

/// Least-squares rigid motion mapping `src[i]` onto `dst[i]` (Umeyama with the
/// scale fixed to one). `None` for fewer than three pairs or a failed SVD.
pub fn fit_rigid(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Option<RigidTransform> {
    let n = src.len();
    if n < 3 || dst.len() != n {
        return None;
    }
    let inv = 1.0 / n as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) * inv;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) * inv;
    let mut cov = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        cov += (d.coords - cd) * (s.coords - cs).transpose();
    }
    cov *= inv;
    let svd = cov.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut sign = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        sign[(2, 2)] = -1.0;
    }
    let r = u * sign * v_t;
    if !r.iter().all(|v| v.is_finite()) {
        return None;
    }
    let t = cd - r * cs;
    Some(RigidTransform::from_parts_projected(r, t))
}
