use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::{PointCloud, SpatialIndex};
use crate::error::{PasdfError, Result};

/// Normals plus the number of neighbourhoods that had no usable covariance.
#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    pub degenerate: usize,
}

/// PCA normals from the `k` nearest neighbours (the query point included), oriented
/// toward `viewpoint`. Degenerate neighbourhoods (all neighbours coincident) get +z
/// and are counted.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Point3<f64>) -> Result<NormalEstimate> {
    if k < 3 {
        return Err(PasdfError::param(format!("normal estimation needs k >= 3, got {k}")));
    }
    if cloud.len() < k {
        return Err(PasdfError::input(format!(
            "normal estimation needs at least k = {k} points, cloud has {}",
            cloud.len()
        )));
    }
    let index = SpatialIndex::new(cloud.points());
    let pts = cloud.points();
    let results: Vec<(Vector3<f64>, bool)> = pts
        .par_iter()
        .map(|p| {
            let neighbors = index.knn(p, k);
            match plane_normal(neighbors.iter().map(|n| &pts[n.index])) {
                Some(mut n) => {
                    if n.dot(&(viewpoint - p)) < 0.0 {
                        n = -n;
                    }
                    (n, false)
                }
                None => (Vector3::z(), true),
            }
        })
        .collect();
    let degenerate = results.iter().filter(|(_, d)| *d).count();
    let normals = results.into_iter().map(|(n, _)| n).collect();
    Ok(NormalEstimate {
        cloud: PointCloud::with_normals(pts.to_vec(), normals)?,
        degenerate,
    })
}

/// Smallest-eigenvalue eigenvector of the neighbourhood covariance, or `None`
/// when the neighbourhood has no spatial extent.
pub(crate) fn plane_normal<'a>(neighbors: impl Iterator<Item = &'a Point3<f64>> + Clone) -> Option<Vector3<f64>> {
    let mut count = 0usize;
    let mut mean = Vector3::zeros();
    for p in neighbors.clone() {
        mean += p.coords;
        count += 1;
    }
    if count == 0 {
        return None;
    }
    mean /= count as f64;
    let mut cov = Matrix3::zeros();
    for p in neighbors {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= count as f64;
    let scale = 1.0 + mean.norm_squared();
    if cov.trace() <= 1e-24 * scale {
        return None;
    }
    let eig = SymmetricEigen::new(cov);
    let (min_i, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let n = eig.eigenvectors.column(min_i).into_owned();
    let norm = n.norm();
    (norm > 0.0).then(|| n / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planar_grid_faces_the_viewpoint() {
        let pts: Vec<Point3<f64>> = (0..10)
            .flat_map(|i| (0..10).map(move |j| Point3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0)))
            .collect();
        let est = estimate_normals(&PointCloud::new(pts), 8, &Point3::new(0.0, 0.0, -10.0)).unwrap();
        assert_eq!(est.degenerate, 0);
        for n in est.cloud.normals().unwrap() {
            assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9, "{n:?}");
        }
    }

    #[test]
    fn sphere_normals_match_analytic_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Point3<f64>> = (0..2000)
            .map(|_| loop {
                let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let n = v.norm();
                if n > 1e-3 && n <= 1.0 {
                    break Point3::from(v / n);
                }
            })
            .collect();
        let est = estimate_normals(&PointCloud::new(pts.clone()), 10, &Point3::origin()).unwrap();
        let good = est
            .cloud
            .normals()
            .unwrap()
            .iter()
            .zip(&pts)
            .filter(|(n, p)| n.angle(&(-p.coords)) < 10f64.to_radians())
            .count();
        assert!(good as f64 >= 0.99 * pts.len() as f64, "{good} of {}", pts.len());
    }

    #[test]
    fn identical_points_are_degenerate() {
        let k = 5;
        let cloud = PointCloud::new(vec![Point3::new(0.3, 0.3, 0.3); k]);
        let est = estimate_normals(&cloud, k, &Point3::origin()).unwrap();
        assert_eq!(est.degenerate, k);
        assert!(est.cloud.normals().unwrap().iter().all(|n| *n == Vector3::z()));
    }

    #[test]
    fn rejects_small_k_and_small_clouds() {
        let cloud = PointCloud::new(vec![Point3::origin(); 4]);
        assert!(estimate_normals(&cloud, 2, &Point3::origin()).is_err());
        assert!(estimate_normals(&cloud, 5, &Point3::origin()).is_err());
    }
}
