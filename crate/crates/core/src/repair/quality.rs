use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assignment::emd;
use crate::error::Result;
use crate::geom::{chamfer_metric, PointCloud};

pub const DEFAULT_EMD_SUBSAMPLE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairQuality {
    /// Summed two-sided Chamfer distance.
    pub cd: f64,
    /// `cd / (|repaired| + |reference|)`.
    pub cd_per_point: f64,
    /// Optimal-bijection distance per point on equal-size subsamples.
    pub emd_per_point: f64,
    pub subsample: usize,
    pub seed: u64,
}

fn subsample(cloud: &PointCloud, m: usize, rng: &mut ChaCha8Rng) -> PointCloud {
    if cloud.len() <= m {
        return cloud.without_normals();
    }
    let mut idx = sample(rng, cloud.len(), m).into_vec();
    idx.sort_unstable();
    cloud.without_normals().select(&idx)
}

/// Chamfer on the full clouds; EMD on seeded random subsamples of equal size
/// (at most `emd_subsample` points each).
pub fn repair_quality(
    repaired: &PointCloud,
    reference: &PointCloud,
    emd_subsample: usize,
    seed: u64,
) -> Result<RepairQuality> {
    let cd = chamfer_metric(repaired, reference)?;
    let m = emd_subsample.max(1).min(repaired.len()).min(reference.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = subsample(repaired, m, &mut rng);
    let b = subsample(reference, m, &mut rng);
    Ok(RepairQuality {
        cd,
        cd_per_point: cd / (repaired.len() + reference.len()) as f64,
        emd_per_point: emd(&a, &b)?,
        subsample: m,
        seed,
    })
}
