use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::PointCloud;
use crate::error::{PasdfError, Result};

/// Integer voxel coordinate `floor(p / v)` per axis.
pub fn voxel_key(p: &Point3<f64>, voxel: f64) -> [i64; 3] {
    [
        (p.x / voxel).floor() as i64,
        (p.y / voxel).floor() as i64,
        (p.z / voxel).floor() as i64,
    ]
}

struct Cell {
    sum: Vector3<f64>,
    normal_sum: Vector3<f64>,
    count: usize,
}

/// Replaces all points of each occupied voxel by their centroid.
///
/// Output cells appear in order of their first member in the input. Normals are
/// averaged and renormalized; if any cell's averaged normal collapses (norm < 1e-9)
/// the output carries no normals at all, since a cloud cannot have partial normals.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0) || !voxel.is_finite() {
        return Err(PasdfError::param(format!("voxel size must be positive, got {voxel}")));
    }
    cloud.ensure_non_empty("voxel_downsample")?;

    let mut slots: HashMap<[i64; 3], usize> = HashMap::new();
    let mut cells: Vec<Cell> = Vec::new();
    let normals = cloud.normals();
    for (i, p) in cloud.points().iter().enumerate() {
        let slot = *slots.entry(voxel_key(p, voxel)).or_insert_with(|| {
            cells.push(Cell {
                sum: Vector3::zeros(),
                normal_sum: Vector3::zeros(),
                count: 0,
            });
            cells.len() - 1
        });
        let cell = &mut cells[slot];
        cell.sum += p.coords;
        if let Some(ns) = normals {
            cell.normal_sum += ns[i];
        }
        cell.count += 1;
    }

    let points: Vec<Point3<f64>> = cells
        .iter()
        .map(|c| Point3::from(c.sum / c.count as f64))
        .collect();
    let out_normals = normals.and_then(|_| {
        cells
            .iter()
            .map(|c| {
                let avg = c.normal_sum / c.count as f64;
                let norm = avg.norm();
                (norm >= 1e-9).then(|| avg / norm)
            })
            .collect::<Option<Vec<_>>>()
    });
    Ok(PointCloud::from_parts_unchecked(points, out_normals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn single_point_is_its_own_centroid() {
        let cloud = PointCloud::new(vec![Point3::new(0.1, 0.1, 0.1)]);
        let out = voxel_downsample(&cloud, 1.0).unwrap();
        assert_eq!(out.points(), &[Point3::new(0.1, 0.1, 0.1)]);
    }

    #[test]
    fn shared_cell_collapses_to_centroid() {
        let cloud = PointCloud::new(vec![Point3::new(0.1, 0.1, 0.1), Point3::new(0.2, 0.2, 0.2)]);
        let out = voxel_downsample(&cloud, 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.points()[0] - Point3::new(0.15, 0.15, 0.15)).norm() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_voxel() {
        let cloud = PointCloud::new(vec![Point3::origin()]);
        assert!(matches!(voxel_downsample(&cloud, 0.0), Err(PasdfError::InvalidParameter(_))));
        assert!(matches!(voxel_downsample(&cloud, -1.0), Err(PasdfError::InvalidParameter(_))));
    }

    #[test]
    fn occupied_cell_count_matches_hash_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Point3<f64>> = (0..1000)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        // independent oracle: string keys over integer-truncated cell ids
        let oracle: HashSet<String> = pts
            .iter()
            .map(|p| format!("{}/{}/{}", (p.x * 4.0) as i32, (p.y * 4.0) as i32, (p.z * 4.0) as i32))
            .collect();
        let out = voxel_downsample(&PointCloud::new(pts), 0.25).unwrap();
        assert_eq!(out.len(), oracle.len());
    }

    #[test]
    fn outputs_lie_inside_member_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Point3<f64>> = (0..500)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let v = 0.3;
        let out = voxel_downsample(&PointCloud::new(pts.clone()), v).unwrap();
        assert!(out.len() <= pts.len());
        for q in out.points() {
            let key = voxel_key(q, v);
            let members: Vec<&Point3<f64>> = pts.iter().filter(|p| voxel_key(p, v) == key).collect();
            assert!(!members.is_empty());
            for a in 0..3 {
                let lo = members.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
                let hi = members.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
                assert!(q[a] >= lo - 1e-12 && q[a] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn normals_are_averaged_and_renormalized() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let cloud = PointCloud::with_normals(
            vec![Point3::new(0.1, 0.1, 0.1), Point3::new(0.2, 0.2, 0.2)],
            vec![Vector3::x(), Vector3::y()],
        )
        .unwrap();
        let out = voxel_downsample(&cloud, 1.0).unwrap();
        let n = out.normals().unwrap()[0];
        assert!((n - Vector3::new(s, s, 0.0)).norm() < 1e-12);
    }
}
