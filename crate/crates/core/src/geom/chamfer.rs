use nalgebra::Point3;
use rayon::prelude::*;

use super::{PointCloud, SpatialIndex};
use crate::error::Result;

/// Squared distance from each query point to its nearest neighbour in `index`.
pub fn nearest_sq_distances(queries: &[Point3<f64>], index: &SpatialIndex) -> Vec<f64> {
    queries
        .par_iter()
        .map(|q| index.nearest(q).map_or(f64::INFINITY, |n| n.dist2))
        .collect()
}

fn one_sided_sum(from: &PointCloud, to: &PointCloud) -> f64 {
    let index = SpatialIndex::new(to.points());
    // collected in input order, summed sequentially: thread-count independent
    nearest_sq_distances(from.points(), &index).iter().sum()
}

/// Mean-per-side two-sided Chamfer distance over squared distances (the
/// alignment loss): `mean_a min_b |a-b|² + mean_b min_a |a-b|²`.
pub fn chamfer_loss(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    a.ensure_non_empty("chamfer_loss")?;
    b.ensure_non_empty("chamfer_loss")?;
    Ok(one_sided_sum(a, b) / a.len() as f64 + one_sided_sum(b, a) / b.len() as f64)
}

/// Summed two-sided Chamfer distance over squared distances (the repair metric).
pub fn chamfer_metric(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    a.ensure_non_empty("chamfer_metric")?;
    b.ensure_non_empty("chamfer_metric")?;
    Ok(one_sided_sum(a, b) + one_sided_sum(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{apply_transform, RigidTransform};
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
        PointCloud::new((0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect())
    }

    fn brute_one_sided(a: &PointCloud, b: &PointCloud) -> f64 {
        a.points()
            .iter()
            .map(|p| b.points().iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
            .sum()
    }

    #[test]
    fn hand_evaluated_values() {
        let a = PointCloud::new(vec![Point3::origin()]);
        let b = PointCloud::new(vec![Point3::new(1.0, 0.0, 0.0)]);
        assert_eq!(chamfer_loss(&a, &b).unwrap(), 2.0);
        let a2 = PointCloud::new(vec![Point3::origin(), Point3::new(2.0, 0.0, 0.0)]);
        assert_eq!(chamfer_metric(&a2, &a).unwrap(), 4.0);
        assert_eq!(chamfer_loss(&a2, &a2).unwrap(), 0.0);
        assert_eq!(chamfer_metric(&a2, &a2).unwrap(), 0.0);
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for _ in 0..10 {
            let a = random_cloud(&mut rng, 64);
            let b = random_cloud(&mut rng, 64);
            let (ab, ba) = (brute_one_sided(&a, &b), brute_one_sided(&b, &a));
            let loss = chamfer_loss(&a, &b).unwrap();
            let metric = chamfer_metric(&a, &b).unwrap();
            assert!((loss - (ab / 64.0 + ba / 64.0)).abs() <= 1e-12 * loss);
            assert!((metric - (ab + ba)).abs() <= 1e-12 * metric);
        }
    }

    #[test]
    fn rejects_empty() {
        let a = PointCloud::new(vec![Point3::origin()]);
        assert!(chamfer_loss(&a, &PointCloud::default()).is_err());
        assert!(chamfer_metric(&PointCloud::default(), &a).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_positive_under_motion(seed in any::<u64>(), tx in 0.01f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_cloud(&mut rng, 40);
            let b = random_cloud(&mut rng, 25);
            prop_assert!((chamfer_loss(&a, &b).unwrap() - chamfer_loss(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((chamfer_metric(&a, &b).unwrap() - chamfer_metric(&b, &a).unwrap()).abs() < 1e-12);
            let moved = apply_transform(&RigidTransform::from_axis_angle(&Vector3::z(), 0.3, Vector3::new(tx, 0.0, 0.0)), &a);
            prop_assert!(chamfer_loss(&a, &moved).unwrap() > 0.0);
            prop_assert_eq!(chamfer_loss(&a, &apply_transform(&RigidTransform::identity(), &a)).unwrap(), 0.0);
        }
    }
}
