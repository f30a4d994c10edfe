use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::anomaly::{inject_anomaly, AnomalyKind, AnomalySpec};
use super::shapes::{generate_shape, ShapeKind, ShapeSpec};
use crate::error::{PasdfError, Result};
use crate::geom::{apply_transform, rotation_angle, PointCloud, RigidTransform};
use crate::sampling::sample_surface;
use crate::sdf::mix_seed;

/// Uniform random axis, angle uniform in `[0, max_angle]`, translation with
/// uniform direction and length uniform in `[0, max_translation]`.
pub fn random_pose(rng: &mut impl Rng, max_angle: f64, max_translation: f64) -> RigidTransform {
    let mut gaussian = || Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    let axis = gaussian();
    let dir = gaussian();
    let angle = rng.random::<f64>() * max_angle;
    let len = rng.random::<f64>() * max_translation;
    let dir = if dir.norm() > 0.0 { dir.normalize() } else { Vector3::x() };
    let axis = if axis.norm() > 0.0 { axis } else { Vector3::z() };
    RigidTransform::from_axis_angle(&axis, angle, dir * len)
}

/// Proper rotations among the signed permutation matrices.
fn signed_permutations() -> Vec<Matrix3<f64>> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::new();
    for perm in PERMS {
        for signs in 0..8u32 {
            let mut m = Matrix3::zeros();
            for (row, &col) in perm.iter().enumerate() {
                m[(row, col)] = if signs & (1 << row) != 0 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

/// Rotation error (radians) of a residual motion modulo the shape's symmetries,
/// together with how far the residual moves the shape's center.
pub fn pose_error(spec: &ShapeSpec, residual: &RigidTransform) -> (f64, f64) {
    let r = residual.rotation();
    let translation = residual.translation().norm();
    let rotation = match spec.kind {
        ShapeKind::Sphere { .. } => 0.0,
        ShapeKind::Box { extents } => {
            let e = Vector3::from(extents);
            signed_permutations()
                .into_iter()
                .filter(|s| (s.abs() * e - e).norm() <= 1e-12 * e.norm())
                .map(|s| rotation_angle(&(r * s.transpose())))
                .fold(f64::INFINITY, f64::min)
        }
        // Free spin about z plus the half-turn flip: only the axis tilt counts.
        ShapeKind::Torus { .. } | ShapeKind::Capsule { .. } => {
            let tilt = (r * Vector3::z()).z.clamp(-1.0, 1.0).acos();
            tilt.min(std::f64::consts::PI - tilt)
        }
    };
    (rotation, translation)
}

pub fn bbox_diagonal(spec: &ShapeSpec) -> f64 {
    2.0 * spec.bounding_radius()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub shapes: Vec<ShapeSpec>,
    pub n_normal: usize,
    pub n_anomalous: usize,
    /// Points per sampled cloud.
    pub n_points: usize,
    /// Points in each case's clean reference, drawn independently of the scan.
    pub reference_points: usize,
    /// Cycled across the anomalous cases.
    pub anomaly_kinds: Vec<AnomalyKind>,
    /// Crop cases added per shape for repair evaluation only.
    pub n_crop: usize,
    /// Anomaly magnitude as a fraction of the shape's bbox diagonal.
    pub magnitude_frac: f64,
    /// Anomaly radius as a fraction of the shape's bbox diagonal.
    pub radius_frac: f64,
    pub random_pose: bool,
    /// Rotation bound in degrees.
    pub max_rotation_deg: f64,
    /// Translation bound as a fraction of the bbox diagonal.
    pub max_translation_frac: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            shapes: vec![
                ShapeSpec::sphere(0.4),
                ShapeSpec::cuboid([0.7, 0.5, 0.35]),
                ShapeSpec::torus(0.35, 0.12),
                ShapeSpec::capsule(0.2, 0.5),
            ],
            n_normal: 10,
            n_anomalous: 10,
            n_points: 2000,
            reference_points: 20_000,
            anomaly_kinds: vec![AnomalyKind::Dent, AnomalyKind::Bulge],
            n_crop: 2,
            magnitude_frac: 0.05,
            radius_frac: 0.15,
            random_pose: true,
            max_rotation_deg: 180.0,
            max_translation_frac: 0.5,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(PasdfError::param("benchmark needs at least one shape"));
        }
        for s in &self.shapes {
            s.validate()?;
        }
        if self.n_normal == 0 || self.n_anomalous == 0 {
            return Err(PasdfError::param("benchmark needs normal and anomalous cases"));
        }
        if self.n_points < 16 || self.reference_points < 16 {
            return Err(PasdfError::param("benchmark clouds need at least 16 points"));
        }
        if self.anomaly_kinds.is_empty() {
            return Err(PasdfError::param("benchmark needs at least one anomaly kind"));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.magnitude_frac) || !positive(self.radius_frac) {
            return Err(PasdfError::param("anomaly magnitude and radius fractions must be positive"));
        }
        if !(0.0..=180.0).contains(&self.max_rotation_deg) || !(self.max_translation_frac >= 0.0) {
            return Err(PasdfError::param("pose bounds must be within [0, 180] degrees and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseRole {
    Normal,
    Anomalous,
    /// Repair-only crop case.
    Crop,
}

#[derive(Debug, Clone)]
pub struct BenchCase {
    pub id: String,
    pub role: CaseRole,
    pub anomaly: Option<AnomalySpec>,
    /// Canonical frame → scan frame.
    pub pose: RigidTransform,
    /// The test scan.
    pub cloud: PointCloud,
    pub labels: Vec<bool>,
    /// A dense defect-free sample in the canonical frame, independent of the scan.
    pub reference: PointCloud,
    pub seed: u64,
}

impl BenchCase {
    pub fn is_anomalous(&self) -> bool {
        self.role != CaseRole::Normal
    }
}

/// The normal training cloud of a benchmark shape (canonical frame, with normals).
pub fn canonical_cloud(spec: &ShapeSpec, n_points: usize, seed: u64) -> Result<PointCloud> {
    sample_surface(&generate_shape(spec, seed)?, n_points, mix_seed(seed, 10, 0))
}

/// Test cases for one shape: normals first, then anomalous, then crops. Every
/// case draws a fresh surface sample and a separate reference sample; ids are
/// `<shape>-<role>-<index>`.
pub fn bench_cases(spec: &ShapeSpec, cfg: &BenchConfig, seed: u64) -> Result<Vec<BenchCase>> {
    cfg.validate()?;
    let mesh = generate_shape(spec, seed)?;
    let diag = bbox_diagonal(spec);
    let max_angle = cfg.max_rotation_deg.to_radians();
    let max_translation = cfg.max_translation_frac * diag;
    let roles = std::iter::repeat_n(CaseRole::Normal, cfg.n_normal)
        .chain(std::iter::repeat_n(CaseRole::Anomalous, cfg.n_anomalous))
        .chain(std::iter::repeat_n(CaseRole::Crop, cfg.n_crop));
    let mut cases = Vec::new();
    let mut per_role = [0usize; 3];
    for (i, role) in roles.enumerate() {
        let case_seed = mix_seed(seed, 11, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
        let sample = sample_surface(&mesh, cfg.n_points, rng.random())?;
        let reference = sample_surface(&mesh, cfg.reference_points, rng.random())?.without_normals();
        let slot = role as usize;
        let index = per_role[slot];
        per_role[slot] += 1;
        let kind = match role {
            CaseRole::Normal => None,
            CaseRole::Anomalous => Some(cfg.anomaly_kinds[index % cfg.anomaly_kinds.len()]),
            CaseRole::Crop => Some(AnomalyKind::Crop),
        };
        let (clean, labels, anomaly) = match kind {
            None => (sample.without_normals(), vec![false; sample.len()], None),
            Some(kind) => {
                let center = sample.points()[rng.random_range(0..sample.len())];
                let a = AnomalySpec {
                    kind,
                    center: center.coords.into(),
                    radius: cfg.radius_frac * diag,
                    magnitude: cfg.magnitude_frac * diag,
                };
                let (cloud, labels) = inject_anomaly(&sample, &a, rng.random())?;
                (cloud, labels, Some(a))
            }
        };
        let pose = if cfg.random_pose {
            random_pose(&mut rng, max_angle, max_translation)
        } else {
            RigidTransform::identity()
        };
        let role_name = match role {
            CaseRole::Normal => "normal",
            CaseRole::Anomalous => "anomalous",
            CaseRole::Crop => "crop",
        };
        cases.push(BenchCase {
            id: format!("{}-{role_name}-{index:02}", spec.name()),
            role,
            anomaly,
            pose,
            cloud: apply_transform(&pose, &clean),
            labels,
            reference,
            seed: case_seed,
        });
    }
    Ok(cases)
}
