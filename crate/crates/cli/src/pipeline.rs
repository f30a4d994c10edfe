//! In-memory pipeline stages shared by the file-based commands and the benchmark.

use log::{info, warn};
use pasdf::anomaly::{score_points, AnomalyReport};
use pasdf::geom::{apply_transform, estimate_normals, PointCloud};
use pasdf::io::Shape3d;
use pasdf::pam::{pose_align, PamParams};
use pasdf::repair::{repair, repair_quality, RepairConfig, RepairOutcome, RepairQuality};
use pasdf::sampling::{label_sdf, sample_queries, sample_surface, NormalizationRecord, QuerySample, SurfaceSource};
use pasdf::sdf::{mix_seed, quantize, train, EncodingConfig, SdfField, TrainConfig, TrainOutcome};
use pasdf::{PasdfError, Result};

use crate::config::{DetectConfig, PrepareConfig};

/// Named sub-streams of the root seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Prepare = 1,
    Train = 2,
    Detect = 3,
    Repair = 4,
    Bench = 5,
}

pub fn stream_seed(root: u64, stream: Stream) -> u64 {
    mix_seed(root, 0x100 + stream as u64, 0)
}

#[derive(Debug, Clone)]
pub struct TrainingInput {
    pub id: String,
    pub shape: Shape3d,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub samples: Vec<QuerySample>,
    pub normalization: NormalizationRecord,
    pub canonical_id: String,
    /// The canonical sample as a cloud in its own frame; later stages align to it.
    pub canonical_cloud: PointCloud,
    /// Training ids in pooling order.
    pub sources: Vec<String>,
    /// Whether each non-canonical input's alignment converged, in `sources` order.
    pub converged: Vec<bool>,
}

fn as_cloud(shape: &Shape3d, n: usize, seed: u64) -> Result<PointCloud> {
    match shape {
        Shape3d::Mesh(m) => sample_surface(m, n, seed),
        Shape3d::Cloud(c) => Ok(c.clone()),
    }
}

/// Outward normals for a closed cloud that lacks them: orient toward the
/// centroid, then flip.
fn with_outward_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if cloud.has_normals() {
        return Ok(cloud.clone());
    }
    let centroid = cloud.centroid().expect("non-empty");
    let mut oriented = estimate_normals(cloud, k.min(cloud.len()), &centroid)?.cloud;
    oriented.flip_normals();
    Ok(oriented)
}

/// Picks the canonical input, aligns the others to it, normalizes everything
/// with the canonical record, and pools labeled query samples.
pub fn prepare(
    inputs: &[TrainingInput],
    canonical: Option<&str>,
    cfg: &PrepareConfig,
    pam: &PamParams,
    seed: u64,
) -> Result<Prepared> {
    if inputs.is_empty() {
        return Err(PasdfError::InvalidInput("no training inputs".into()));
    }
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.sort_by(|&a, &b| inputs[a].id.cmp(&inputs[b].id));
    let canonical_pos = match canonical {
        Some(id) => order
            .iter()
            .position(|&i| inputs[i].id == id)
            .ok_or_else(|| PasdfError::InvalidParameter(format!("canonical id '{id}' is not a training input")))?,
        None => 0,
    };
    let canon = &inputs[order[canonical_pos]];
    let canonical_cloud = as_cloud(&canon.shape, cfg.align_points, mix_seed(seed, 1, 0))?;
    let bounds = match &canon.shape {
        Shape3d::Mesh(m) => m.bounds(),
        Shape3d::Cloud(c) => c.bounds(),
    }
    .ok_or_else(|| PasdfError::InvalidInput(format!("training input '{}' is empty", canon.id)))?;
    let normalization = NormalizationRecord::fit_padded(&bounds, cfg.padding)?;

    let mut samples = Vec::new();
    let mut sources = Vec::new();
    let mut converged = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let input = &inputs[i];
        let transform = if pos == canonical_pos {
            converged.push(true);
            pasdf::RigidTransform::identity()
        } else {
            let cloud = as_cloud(&input.shape, cfg.align_points, mix_seed(seed, 2, pos as u64))?;
            let params = PamParams {
                seed: mix_seed(seed, 3, pos as u64),
                ..pam.clone()
            };
            let a = pose_align(&cloud, &canonical_cloud, &params)?;
            if !a.converged {
                warn!("training input '{}' did not converge to the canonical pose (chamfer {:.3e})", input.id, a.final_chamfer);
            }
            converged.push(a.converged);
            a.cumulative
        };
        let query_seed = mix_seed(seed, 4, pos as u64);
        let labeled = match &input.shape {
            Shape3d::Mesh(m) => {
                let m = m.map_vertices(|p| normalization.apply(&transform.apply_point(p)));
                let queries = sample_queries(SurfaceSource::Mesh(&m), &cfg.queries, query_seed)?;
                let reference = sample_surface(&m, cfg.queries.n_label, mix_seed(seed, 5, pos as u64))?;
                label_sdf(&queries, &reference)?
            }
            Shape3d::Cloud(c) => {
                let c = normalization.apply_cloud(&apply_transform(&transform, c));
                let surface = with_outward_normals(&c, cfg.normal_neighbors)?;
                let queries = sample_queries(SurfaceSource::Cloud(&surface), &cfg.queries, query_seed)?;
                label_sdf(&queries, &surface)?
            }
        };
        info!("prepared {} query samples from '{}'", labeled.len(), input.id);
        samples.extend(labeled);
        sources.push(input.id.clone());
    }
    Ok(Prepared {
        samples,
        normalization,
        canonical_id: canon.id.clone(),
        canonical_cloud,
        sources,
        converged,
    })
}

/// Trains and returns the field as it would be reloaded from a checkpoint
/// (parameters rounded to f32).
pub fn train_field(
    samples: &[QuerySample],
    normalization: NormalizationRecord,
    encoding: &EncodingConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<(SdfField, TrainOutcome)> {
    let cfg = TrainConfig { seed, ..*train_cfg };
    let outcome = train(samples, &cfg, encoding)?;
    let field = SdfField::new(quantize(&outcome.model), *encoding, normalization)?;
    Ok((field, outcome))
}

pub fn pam_for(pam: &PamParams, enabled: bool, seed: u64) -> Option<PamParams> {
    enabled.then(|| PamParams { seed, ..pam.clone() })
}

pub fn detect(
    field: &SdfField,
    canonical: &PointCloud,
    cloud: &PointCloud,
    cfg: &DetectConfig,
    pam: &PamParams,
    seed: u64,
) -> Result<AnomalyReport> {
    let params = pam_for(pam, cfg.use_pam, seed);
    score_points(field, cloud, canonical, params.as_ref())?.aggregate(cfg.top_k)
}

#[derive(Debug, Clone)]
pub struct RepairResult {
    pub outcome: RepairOutcome,
    /// Against the reference, when one is given: repaired quality and the aligned input's Chamfer.
    pub quality: Option<(RepairQuality, f64)>,
}

#[allow(clippy::too_many_arguments)]
pub fn repair_one(
    field: &SdfField,
    canonical: &PointCloud,
    cloud: &PointCloud,
    reference: Option<&PointCloud>,
    cfg: &RepairConfig,
    emd_subsample: usize,
    pam: Option<&PamParams>,
    seed: u64,
) -> Result<RepairResult> {
    let cfg = RepairConfig { seed, ..*cfg };
    let outcome = repair(cloud, field, canonical, &cfg, pam)?;
    let quality = match reference {
        Some(r) => {
            let q = repair_quality(&outcome.cloud, r, emd_subsample, mix_seed(seed, 1, 0))?;
            let input_cd = pasdf::geom::chamfer_metric(&outcome.aligned_input, r)?;
            Some((q, input_cd))
        }
        None => None,
    };
    Ok(RepairResult { outcome, quality })
}
