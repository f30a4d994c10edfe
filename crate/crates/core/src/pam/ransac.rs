//! Feature-correspondence RANSAC for coarse rigid registration.

use nalgebra::Point3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fpfh::FpfhDescriptor;
use super::rigid_fit::fit_rigid;
use crate::error::{PasdfError, Result};
use crate::geom::{PointCloud, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub max_iterations: usize,
    /// Correspondences per hypothesis.
    pub sample_size: usize,
    /// Inlier distance after transformation; also bounds each sampled pair.
    pub distance_threshold: f64,
    /// Sampled edge lengths in source and target must agree within this ratio.
    pub edge_length_ratio: f64,
    pub confidence: f64,
}

impl RansacParams {
    pub fn with_threshold(distance_threshold: f64) -> Self {
        RansacParams {
            max_iterations: 100_000,
            sample_size: 3,
            distance_threshold,
            edge_length_ratio: 0.9,
            confidence: 0.999,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 3 {
            return Err(PasdfError::param("RANSAC sample_size must be at least 3"));
        }
        if !(self.distance_threshold > 0.0) {
            return Err(PasdfError::param("RANSAC distance_threshold must be positive"));
        }
        if !(self.edge_length_ratio > 0.0 && self.edge_length_ratio < 1.0) {
            return Err(PasdfError::param("RANSAC edge_length_ratio must lie in (0, 1)"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(PasdfError::param("RANSAC confidence must lie in (0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(PasdfError::param("RANSAC max_iterations must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub transform: RigidTransform,
    /// Correspondences within `distance_threshold` under `transform`.
    pub inliers: usize,
    pub correspondences: usize,
    pub iterations: usize,
    /// True when the mutual filter left too few pairs and one-directional matches were used.
    pub used_one_directional: bool,
}

impl RansacResult {
    pub fn inlier_fraction(&self) -> f64 {
        if self.correspondences == 0 {
            0.0
        } else {
            self.inliers as f64 / self.correspondences as f64
        }
    }
}

fn nearest_descriptor(query: &FpfhDescriptor, pool: &[FpfhDescriptor]) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for (j, d) in pool.iter().enumerate() {
        let dist = query.distance_squared(d);
        if dist < best.0 {
            best = (dist, j);
        }
    }
    best.1
}

/// Pairs `(i, j)` where `j` is the nearest target descriptor of source `i`, and,
/// when `mutual`, `i` is also the nearest source descriptor of `j`.
pub fn match_descriptors(
    f_src: &[FpfhDescriptor],
    f_tgt: &[FpfhDescriptor],
    mutual: bool,
) -> Vec<(usize, usize)> {
    if f_src.is_empty() || f_tgt.is_empty() {
        return Vec::new();
    }
    let fwd: Vec<usize> = f_src.par_iter().map(|f| nearest_descriptor(f, f_tgt)).collect();
    if !mutual {
        return fwd.into_iter().enumerate().collect();
    }
    let bwd: Vec<usize> = f_tgt.par_iter().map(|f| nearest_descriptor(f, f_src)).collect();
    fwd.into_iter()
        .enumerate()
        .filter(|&(i, j)| bwd[j] == i)
        .collect()
}

fn count_inliers(t: &RigidTransform, src: &[Point3<f64>], dst: &[Point3<f64>], thr2: f64) -> (usize, f64) {
    let mut count = 0;
    let mut err = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let e = (t.apply_point(s) - d).norm_squared();
        if e <= thr2 {
            count += 1;
            err += e;
        }
    }
    (count, err)
}

fn edge_lengths_consistent(src: &[Point3<f64>], dst: &[Point3<f64>], ratio: f64) -> bool {
    for a in 0..src.len() {
        for b in a + 1..src.len() {
            let ls = (src[a] - src[b]).norm();
            let ld = (dst[a] - dst[b]).norm();
            if ls < ratio * ld || ld < ratio * ls {
                return false;
            }
        }
    }
    true
}

/// Coarse registration of `src` onto `tgt` from FPFH correspondences.
///
/// Correspondences come from mutual nearest neighbours in descriptor space; if
/// fewer than `3 * sample_size` survive the mutual filter, one-directional
/// matches are used instead. Each hypothesis is pruned by the edge-length check
/// and a per-pair distance check, then scored by inlier count. The winner is
/// refit on its inliers. Deterministic for a fixed seed.
pub fn ransac_align(
    src: &PointCloud,
    tgt: &PointCloud,
    f_src: &[FpfhDescriptor],
    f_tgt: &[FpfhDescriptor],
    params: &RansacParams,
    seed: u64,
) -> Result<RansacResult> {
    params.validate()?;
    if f_src.len() != src.len() || f_tgt.len() != tgt.len() {
        return Err(PasdfError::input("descriptor count does not match cloud size"));
    }
    let n = params.sample_size;
    let mut corr = match_descriptors(f_src, f_tgt, true);
    let mut used_one_directional = false;
    if corr.len() < 3 * n {
        corr = match_descriptors(f_src, f_tgt, false);
        used_one_directional = true;
    }
    if corr.len() < n {
        return Err(PasdfError::CoarseAlignmentFailed {
            found: corr.len(),
            required: n,
        });
    }
    let cs: Vec<Point3<f64>> = corr.iter().map(|&(i, _)| src.points()[i]).collect();
    let cd: Vec<Point3<f64>> = corr.iter().map(|&(_, j)| tgt.points()[j]).collect();
    let thr2 = params.distance_threshold * params.distance_threshold;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(RigidTransform, usize, f64)> = None;
    let mut budget = params.max_iterations;
    let mut iterations = 0;
    let mut s_buf = Vec::with_capacity(n);
    let mut d_buf = Vec::with_capacity(n);
    while iterations < budget {
        iterations += 1;
        let picks = sample(&mut rng, corr.len(), n);
        s_buf.clear();
        d_buf.clear();
        for k in picks.iter() {
            s_buf.push(cs[k]);
            d_buf.push(cd[k]);
        }
        if !edge_lengths_consistent(&s_buf, &d_buf, params.edge_length_ratio) {
            continue;
        }
        let Some(t) = fit_rigid(&s_buf, &d_buf) else {
            continue;
        };
        if s_buf
            .iter()
            .zip(&d_buf)
            .any(|(s, d)| (t.apply_point(s) - d).norm_squared() > thr2)
        {
            continue;
        }
        let (count, err) = count_inliers(&t, &cs, &cd, thr2);
        let better = match &best {
            None => true,
            Some((_, bc, be)) => count > *bc || (count == *bc && err < *be),
        };
        if better {
            best = Some((t, count, err));
            let fitness = count as f64 / corr.len() as f64;
            let p_good = fitness.powi(n as i32);
            if p_good >= 1.0 {
                budget = iterations;
            } else if p_good > 0.0 {
                let needed = ((1.0 - params.confidence).ln() / (1.0 - p_good).ln()).ceil();
                if needed.is_finite() && needed >= 0.0 {
                    budget = budget.min((needed as usize).max(iterations));
                }
            }
        }
    }

    let Some((t, count, _)) = best else {
        return Err(PasdfError::CoarseAlignmentFailed {
            found: 0,
            required: n,
        });
    };
    // refit on the inlier set of the winning hypothesis
    let (in_s, in_d): (Vec<Point3<f64>>, Vec<Point3<f64>>) = cs
        .iter()
        .zip(&cd)
        .filter(|(s, d)| (t.apply_point(s) - *d).norm_squared() <= thr2)
        .map(|(s, d)| (*s, *d))
        .unzip();
    let (transform, inliers) = match fit_rigid(&in_s, &in_d) {
        Some(refit) => {
            let (c, _) = count_inliers(&refit, &cs, &cd, thr2);
            if c >= count {
                (refit, c)
            } else {
                (t, count)
            }
        }
        None => (t, count),
    };
    Ok(RansacResult {
        transform,
        inliers,
        correspondences: corr.len(),
        iterations,
        used_one_directional,
    })
}
