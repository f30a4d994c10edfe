//! Fast Point Feature Histograms.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::error::{PasdfError, Result};
use crate::geom::{PointCloud, SpatialIndex};

pub const BINS_PER_FEATURE: usize = 11;
pub const FPFH_DIM: usize = 3 * BINS_PER_FEATURE;

/// 33-bin descriptor: three 11-bin angular sub-histograms, each summing to 100
/// (or all zero for a point without neighbours).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpfhDescriptor(pub [f64; FPFH_DIM]);

impl Default for FpfhDescriptor {
    fn default() -> Self {
        FpfhDescriptor([0.0; FPFH_DIM])
    }
}

impl FpfhDescriptor {
    pub fn histogram(&self) -> &[f64; FPFH_DIM] {
        &self.0
    }

    pub fn sub_histogram(&self, feature: usize) -> &[f64] {
        &self.0[feature * BINS_PER_FEATURE..(feature + 1) * BINS_PER_FEATURE]
    }

    pub fn distance_squared(&self, other: &FpfhDescriptor) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    fn normalize_sub_histograms(&mut self) {
        for f in 0..3 {
            let bins = &mut self.0[f * BINS_PER_FEATURE..(f + 1) * BINS_PER_FEATURE];
            let sum: f64 = bins.iter().sum();
            if sum > 0.0 {
                bins.iter_mut().for_each(|b| *b *= 100.0 / sum);
            }
        }
    }
}

/// Darboux-frame pair features `(theta, alpha, phi)` between two oriented points,
/// using the source/target role choice that makes the source normal the one most
/// aligned with the connecting line. `None` when the frame is undefined.
pub fn pair_features(
    p1: &Point3<f64>,
    n1: &Vector3<f64>,
    p2: &Point3<f64>,
    n2: &Vector3<f64>,
) -> Option<[f64; 3]> {
    let mut dp = p2 - p1;
    let dist = dp.norm();
    if dist == 0.0 {
        return None;
    }
    let angle1 = n1.dot(&dp) / dist;
    let angle2 = n2.dot(&dp) / dist;
    let (src_n, tgt_n, phi) = if angle1.abs().acos() > angle2.abs().acos() {
        dp = -dp;
        (n2, n1, -angle2)
    } else {
        (n1, n2, angle1)
    };
    let v = dp.cross(src_n);
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return None;
    }
    let v = v / v_norm;
    let w = src_n.cross(&v);
    let alpha = v.dot(tgt_n);
    let theta = w.dot(tgt_n).atan2(src_n.dot(tgt_n));
    Some([theta, alpha, phi])
}

/// Histogram bin for each pair feature.
pub fn feature_bins(f: &[f64; 3]) -> [usize; 3] {
    let bin = |t: f64| ((BINS_PER_FEATURE as f64 * t).floor() as isize).clamp(0, BINS_PER_FEATURE as isize - 1) as usize;
    [
        bin((f[0] + PI) / (2.0 * PI)),
        bin((f[1] + 1.0) * 0.5),
        bin((f[2] + 1.0) * 0.5),
    ]
}

struct Neighborhood {
    indices: Vec<usize>,
    distances: Vec<f64>,
}

fn spfh(
    i: usize,
    points: &[Point3<f64>],
    normals: &[Vector3<f64>],
    hood: &Neighborhood,
) -> FpfhDescriptor {
    let features: Vec<[f64; 3]> = hood
        .indices
        .iter()
        .filter_map(|&j| pair_features(&points[i], &normals[i], &points[j], &normals[j]))
        .collect();
    let mut hist = FpfhDescriptor::default();
    if features.is_empty() {
        return hist;
    }
    let incr = 100.0 / features.len() as f64;
    for f in &features {
        for (k, b) in feature_bins(f).iter().enumerate() {
            hist.0[k * BINS_PER_FEATURE + b] += incr;
        }
    }
    hist
}

/// Two-pass FPFH over radius neighbourhoods: per-point SPFH, then
/// `SPFH_i + (1/k) Σ_j SPFH_j / |p_i − p_j|`, renormalized per sub-histogram.
pub fn compute_fpfh(cloud: &PointCloud, radius: f64) -> Result<Vec<FpfhDescriptor>> {
    let normals = cloud
        .normals()
        .ok_or_else(|| PasdfError::input("FPFH requires a cloud with normals"))?;
    if !(radius > 0.0) {
        return Err(PasdfError::param(format!("FPFH radius must be positive, got {radius}")));
    }
    let points = cloud.points();
    let index = SpatialIndex::new(points);
    let hoods: Vec<Neighborhood> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut indices = Vec::new();
            let mut distances = Vec::new();
            for n in index.within_radius(p, radius) {
                if n.index != i && n.dist2 > 0.0 {
                    indices.push(n.index);
                    distances.push(n.dist2.sqrt());
                }
            }
            Neighborhood { indices, distances }
        })
        .collect();
    let spfhs: Vec<FpfhDescriptor> = (0..points.len())
        .into_par_iter()
        .map(|i| spfh(i, points, normals, &hoods[i]))
        .collect();
    let out = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let hood = &hoods[i];
            if hood.indices.is_empty() {
                return FpfhDescriptor::default();
            }
            let mut acc = spfhs[i];
            let k = hood.indices.len() as f64;
            for (&j, &d) in hood.indices.iter().zip(&hood.distances) {
                let w = 1.0 / (k * d);
                for (a, s) in acc.0.iter_mut().zip(spfhs[j].0.iter()) {
                    *a += w * s;
                }
            }
            acc.normalize_sub_histograms();
            acc
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isolated_point_has_zero_descriptor() {
        let cloud = PointCloud::with_normals(
            vec![Point3::origin(), Point3::new(10.0, 0.0, 0.0)],
            vec![Vector3::z(), Vector3::z()],
        )
        .unwrap();
        let d = compute_fpfh(&cloud, 1.0).unwrap();
        assert!(d.iter().all(|h| h.is_zero()));
    }

    #[test]
    fn requires_normals_and_positive_radius() {
        let cloud = PointCloud::new(vec![Point3::origin()]);
        assert!(compute_fpfh(&cloud, 1.0).is_err());
        let with = PointCloud::with_normals(vec![Point3::origin()], vec![Vector3::z()]).unwrap();
        assert!(compute_fpfh(&with, 0.0).is_err());
    }

    /// Scalar re-derivation of the Darboux features for two points on the x axis
    /// with parallel +z normals.
    #[test]
    fn two_point_pair_matches_hand_computed_spfh() {
        let d = 0.5;
        let cloud = PointCloud::with_normals(
            vec![Point3::origin(), Point3::new(d, 0.0, 0.0)],
            vec![Vector3::z(), Vector3::z()],
        )
        .unwrap();
        let desc = compute_fpfh(&cloud, 1.0).unwrap();

        // u = n1 = z; v = (dp × u)/|.| = (x × z) = -y; w = u × v = z × -y = x
        // theta = atan2(w·n2, u·n2) = atan2(0, 1) = 0; alpha = v·n2 = 0; phi = u·dp/|dp| = 0
        let (theta, alpha, phi) = (0.0f64, 0.0f64, 0.0f64);
        let bin = |t: f64| ((11.0 * t).floor() as usize).min(10);
        let expected_bins = [
            bin((theta + PI) / (2.0 * PI)),
            bin((alpha + 1.0) / 2.0),
            bin((phi + 1.0) / 2.0),
        ];
        assert_eq!(expected_bins, [5, 5, 5]);
        let mut expected = [0.0; FPFH_DIM];
        for (f, b) in expected_bins.iter().enumerate() {
            expected[f * 11 + b] = 100.0;
        }
        for h in &desc {
            for (a, b) in h.0.iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sub_histograms_sum_to_one_hundred() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point3<f64>> = (0..300).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
        let normals: Vec<Vector3<f64>> = (0..300)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0)).normalize())
            .collect();
        let desc = compute_fpfh(&PointCloud::with_normals(pts, normals).unwrap(), 0.2).unwrap();
        for h in &desc {
            if h.is_zero() {
                continue;
            }
            for f in 0..3 {
                let s: f64 = h.sub_histogram(f).iter().sum();
                assert!((s - 100.0).abs() < 1e-6);
            }
            assert!(h.0.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn antipodal_sphere_points_look_alike() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut pts = Vec::new();
        while pts.len() < 3000 {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                pts.push(v / n);
            }
        }
        // probe pairs appended as exact antipodes
        let probes: Vec<Vector3<f64>> = pts[..20].to_vec();
        for p in &probes {
            pts.push(-p);
        }
        let cloud = PointCloud::with_normals(pts.iter().map(|v| Point3::from(*v)).collect(), pts.clone()).unwrap();
        let desc = compute_fpfh(&cloud, 0.3 * 2.0).unwrap();
        let mean_norm = desc.iter().map(|d| d.norm()).sum::<f64>() / desc.len() as f64;
        let max_gap = (0..20)
            .map(|i| desc[i].distance_squared(&desc[3000 + i]).sqrt())
            .fold(0.0, f64::max);
        assert!(max_gap < 0.1 * mean_norm, "gap {max_gap} vs mean norm {mean_norm}");
    }
}
