use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{PasdfError, Result};
use crate::geom::{PointCloud, SpatialIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Pushed inward along the normal.
    Dent,
    /// Pushed outward along the normal.
    Bulge,
    /// Points inside the ball removed.
    Crop,
    /// Gaussian jitter inside the ball.
    NoisePatch,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 4] = [AnomalyKind::Dent, AnomalyKind::Bulge, AnomalyKind::Crop, AnomalyKind::NoisePatch];

    pub fn name(&self) -> &'static str {
        match self {
            AnomalyKind::Dent => "dent",
            AnomalyKind::Bulge => "bulge",
            AnomalyKind::Crop => "crop",
            AnomalyKind::NoisePatch => "noise_patch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub center: [f64; 3],
    pub radius: f64,
    /// Peak displacement for dents and bulges, jitter σ for noise patches.
    pub magnitude: f64,
}

impl AnomalySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(PasdfError::param("anomaly radius must be positive"));
        }
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(PasdfError::param("anomaly magnitude must be non-negative"));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(PasdfError::param("anomaly center must be finite"));
        }
        Ok(())
    }
}

/// Raised cosine: 1 at the center, 0 with zero slope at the rim.
fn falloff(d: f64, radius: f64) -> f64 {
    0.5 * (1.0 + (std::f64::consts::PI * d / radius).cos())
}

fn mean_spacing(cloud: &PointCloud) -> f64 {
    if cloud.len() < 2 {
        return 0.0;
    }
    let index = SpatialIndex::new(cloud.points());
    cloud.points().iter().map(|p| index.knn(p, 2)[1].dist2.sqrt()).sum::<f64>() / cloud.len() as f64
}

/// Applies a synthetic defect and returns the modified cloud (without normals)
/// with per-point labels, true marking anomalous points. Dents and bulges need
/// outward normals. For crops the labels mark surviving points within one mean
/// nearest-neighbour spacing of the hole.
pub fn inject_anomaly(cloud: &PointCloud, spec: &AnomalySpec, seed: u64) -> Result<(PointCloud, Vec<bool>)> {
    spec.validate()?;
    cloud.ensure_non_empty("inject_anomaly")?;
    let center = Point3::from(spec.center);
    let dist: Vec<f64> = cloud.points().iter().map(|p| (p - center).norm()).collect();
    let inside: Vec<bool> = dist.iter().map(|&d| d < spec.radius).collect();
    if !inside.iter().any(|&i| i) {
        return Err(PasdfError::param(format!(
            "{} anomaly of radius {} at {:?} touches no points",
            spec.kind.name(),
            spec.radius,
            spec.center
        )));
    }
    let mut points = cloud.points().to_vec();
    let mut labels = vec![false; points.len()];
    match spec.kind {
        AnomalyKind::Dent | AnomalyKind::Bulge => {
            let normals = cloud.normals().ok_or_else(|| {
                PasdfError::input(format!("{} anomalies need point normals", spec.kind.name()))
            })?;
            let sign = if spec.kind == AnomalyKind::Dent { -1.0 } else { 1.0 };
            for i in 0..points.len() {
                if !inside[i] {
                    continue;
                }
                let shift = spec.magnitude * falloff(dist[i], spec.radius);
                if shift > 0.0 {
                    points[i] += normals[i] * (sign * shift);
                    labels[i] = true;
                }
            }
        }
        AnomalyKind::NoisePatch => {
            if spec.magnitude > 0.0 {
                let noise = Normal::new(0.0, spec.magnitude).expect("positive sigma");
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for i in 0..points.len() {
                    if inside[i] {
                        for a in 0..3 {
                            points[i][a] += noise.sample(&mut rng);
                        }
                        labels[i] = points[i] != cloud.points()[i];
                    }
                }
            }
        }
        AnomalyKind::Crop => {
            let rim = spec.radius + mean_spacing(cloud);
            let keep: Vec<usize> = (0..points.len()).filter(|&i| !inside[i]).collect();
            if keep.is_empty() {
                return Err(PasdfError::param("crop removes every point"));
            }
            let kept = cloud.without_normals().select(&keep);
            let kept_labels = keep.iter().map(|&i| dist[i] <= rim).collect();
            return Ok((kept, kept_labels));
        }
    }
    Ok((PointCloud::new(points), labels))
}
