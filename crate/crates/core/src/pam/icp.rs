use nalgebra::Point3;
use rayon::prelude::*;

use super::rigid_fit::fit_rigid;
use crate::error::Result;
use crate::geom::{PointCloud, RigidTransform, SpatialIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Full source-to-target transform, including the initial guess.
    pub transform: RigidTransform,
    /// Mean squared closest-point residual at each evaluated transform.
    pub residuals: Vec<f64>,
}

impl IcpResult {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("at least one residual")
    }
}

/// Point-to-point ICP seeded at `init`. Stops once the mean-squared residual
/// improves by less than `tol`, or after `max_iter` correspondence rounds.
pub fn icp_refine(
    src: &PointCloud,
    tgt: &PointCloud,
    init: &RigidTransform,
    max_iter: usize,
    tol: f64,
) -> Result<IcpResult> {
    src.ensure_non_empty("icp source")?;
    tgt.ensure_non_empty("icp target")?;
    let index = SpatialIndex::new(tgt.points());
    icp_with_index(src.points(), &index, init, max_iter, tol)
}

pub(crate) fn icp_with_index(
    src: &[Point3<f64>],
    index: &SpatialIndex,
    init: &RigidTransform,
    max_iter: usize,
    tol: f64,
) -> Result<IcpResult> {
    let tgt = index.points();
    let mut current = *init;
    let mut residuals = Vec::new();
    let max_rounds = max_iter.max(1);
    for round in 0..max_rounds {
        let matches: Vec<(usize, f64)> = src
            .par_iter()
            .map(|p| {
                let n = index.nearest(&current.apply_point(p)).expect("non-empty target");
                (n.index, n.dist2)
            })
            .collect();
        let mse = matches.iter().map(|m| m.1).sum::<f64>() / src.len() as f64;
        if let Some(&prev) = residuals.last() {
            if prev - mse < tol {
                residuals.push(mse);
                break;
            }
        }
        residuals.push(mse);
        if round + 1 == max_rounds {
            break;
        }
        let dst: Vec<Point3<f64>> = matches.iter().map(|&(j, _)| tgt[j]).collect();
        match fit_rigid(src, &dst) {
            Some(next) => current = next,
            None => break,
        }
    }
    Ok(IcpResult {
        transform: current,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::apply_transform;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere(rng: &mut impl Rng, n: usize) -> PointCloud {
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let norm = v.norm();
            if norm > 1e-3 && norm <= 1.0 {
                pts.push(Point3::from(v / norm * 0.5));
            }
        }
        PointCloud::new(pts)
    }

    #[test]
    fn aligned_pair_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cloud = sphere(&mut rng, 500);
        let res = icp_refine(&cloud, &cloud, &RigidTransform::identity(), 20, 1e-14).unwrap();
        assert!(res.transform.max_abs_diff(&RigidTransform::identity()) < 1e-6);
        for w in res.residuals.windows(2) {
            assert!((w[0] - w[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn recovers_small_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = sphere(&mut rng, 4000);
        let shift = Vector3::new(0.05, 0.0, 0.0);
        let tgt = apply_transform(&RigidTransform::from_translation(shift), &src);
        let res = icp_refine(&src, &tgt, &RigidTransform::identity(), 100, 1e-16).unwrap();
        assert!((res.transform.translation() - shift).norm() < 1e-3, "{:?}", res.transform.translation());
    }

    #[test]
    fn residual_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in 0..8 {
            let src = sphere(&mut rng, 600);
            let scale = 1.0 + 0.1 * case as f64;
            let noisy = PointCloud::new(
                src.points()
                    .iter()
                    .map(|p| p + Vector3::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01)) * scale)
                    .collect(),
            );
            let g = RigidTransform::from_axis_angle(&Vector3::new(0.2, 1.0, 0.3), 0.4, Vector3::new(0.1, -0.05, 0.02));
            let tgt = apply_transform(&g, &noisy);
            let res = icp_refine(&src, &tgt, &RigidTransform::identity(), 60, 0.0).unwrap();
            for w in res.residuals.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "residual rose {} -> {}", w[0], w[1]);
            }
        }
    }
}
