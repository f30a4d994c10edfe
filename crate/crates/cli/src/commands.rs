use std::path::{Path, PathBuf};

use log::{info, warn};
use pasdf::anomaly::{auroc, LabeledScores};
use pasdf::geom::PointCloud;
use pasdf::io::{
    load_cloud, load_query_set, load_shape, read_ply, save_cloud, save_mesh, save_query_set, tier_counts, QuerySidecar,
};
use pasdf::repair::RepairQuality;
use pasdf::sdf::{load_checkpoint, save_checkpoint, CheckpointMetadata, SdfField};
use pasdf::{PasdfError, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::pipeline::{self, stream_seed, Stream, TrainingInput};

pub const SAMPLES_FILE: &str = "samples.bin";
pub const CANONICAL_FILE: &str = "canonical.ply";
pub const CHECKPOINT_FILE: &str = "model.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const DETECT_DIR: &str = "detect";
pub const REPAIR_DIR: &str = "repair";
pub const RESULTS_FILE: &str = "results.json";

/// Vertex property carrying per-point ground truth in test PLY files.
pub const LABEL_PROPERTY: &str = "label";

pub fn file_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn with_path(path: &Path, e: PasdfError) -> PasdfError {
    match e {
        PasdfError::Io(io) => PasdfError::InvalidInput(format!("{}: {io}", path.display())),
        other => other,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| with_path(dir, e.into()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| with_path(path, e.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub samples: PathBuf,
    pub count: usize,
    pub canonical: String,
}

/// Aligns the training inputs to the canonical one, samples and labels
/// queries, and writes the record stream, its sidecar and the canonical cloud.
pub fn cmd_prepare(cfg: &RunConfig) -> Result<PrepareSummary> {
    cfg.validate()?;
    let mut inputs = Vec::new();
    let mut failures = Vec::new();
    for path in &cfg.inputs.train {
        match load_shape(path) {
            Ok(shape) => inputs.push(TrainingInput { id: file_id(path), shape }),
            Err(e) => {
                let e = with_path(path, e);
                log::error!("{e}");
                failures.push(e.to_string());
            }
        }
    }
    if !failures.is_empty() {
        return Err(PasdfError::InvalidInput(failures.join("; ")));
    }
    let seed = stream_seed(cfg.seed, Stream::Prepare);
    let prepared = pipeline::prepare(&inputs, cfg.canonical.as_deref(), &cfg.prepare, &cfg.pam, seed)?;
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join(SAMPLES_FILE);
    let sidecar = QuerySidecar {
        count: prepared.samples.len(),
        tier_counts: tier_counts(&prepared.samples),
        seed,
        normalization: prepared.normalization,
        sources: prepared.sources.clone(),
        canonical: prepared.canonical_id.clone(),
    };
    save_query_set(&path, &prepared.samples, &sidecar)?;
    save_cloud(&cfg.out.join(CANONICAL_FILE), &prepared.canonical_cloud, None)?;
    info!("wrote {} query samples to {}", prepared.samples.len(), path.display());
    Ok(PrepareSummary {
        samples: path,
        count: prepared.samples.len(),
        canonical: prepared.canonical_id,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub epochs: usize,
    pub final_loss: Option<f64>,
}

/// Trains on the prepared samples; writes the checkpoint, its metadata and the loss history.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let samples_path = cfg.out.join(SAMPLES_FILE);
    let (samples, sidecar) = load_query_set(&samples_path).map_err(|e| with_path(&samples_path, e))?;
    let seed = stream_seed(cfg.seed, Stream::Train);
    let (_, outcome) = pipeline::train_field(&samples, sidecar.normalization, &cfg.encoding, &cfg.train, seed)?;
    let train_cfg = pasdf::sdf::TrainConfig { seed, ..cfg.train };
    let meta = CheckpointMetadata::new(&outcome.model, cfg.encoding, sidecar.normalization, train_cfg, outcome.final_loss());
    let path = cfg.out.join(CHECKPOINT_FILE);
    save_checkpoint(&path, &outcome.model, &meta)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in outcome.loss_history.iter().enumerate() {
        csv.push_str(&format!("{e},{l:.17e}\n"));
    }
    std::fs::write(cfg.out.join(LOSS_FILE), csv)?;
    info!("wrote {} (final loss {:?})", path.display(), outcome.final_loss());
    Ok(TrainSummary {
        checkpoint: path,
        epochs: outcome.loss_history.len(),
        final_loss: outcome.final_loss(),
    })
}

/// The trained field and canonical cloud, checked against the configured architecture.
pub fn load_model(cfg: &RunConfig) -> Result<(SdfField, PointCloud)> {
    let path = cfg.out.join(CHECKPOINT_FILE);
    let (model, meta) = load_checkpoint(&path).map_err(|e| with_path(&path, e))?;
    let want = cfg.train.architecture(&cfg.encoding);
    let got = model.architecture();
    if meta.encoding != cfg.encoding
        || (want.input_dim, want.hidden_width, want.num_layers, want.skip_layer)
            != (got.input_dim, got.hidden_width, got.num_layers, got.skip_layer)
    {
        return Err(PasdfError::ArtifactMismatch(format!(
            "{} holds {got:?} with {:?}, config expects {want:?} with {:?}",
            path.display(),
            meta.encoding,
            cfg.encoding
        )));
    }
    let field = SdfField::new(model, meta.encoding, meta.normalization)?;
    let canonical_path = cfg.out.join(CANONICAL_FILE);
    let canonical = load_cloud(&canonical_path).map_err(|e| with_path(&canonical_path, e))?;
    Ok((field, canonical))
}

/// A test cloud with its optional per-point labels.
pub fn load_test_cloud(path: &Path) -> Result<(PointCloud, Option<Vec<bool>>)> {
    let cloud = load_cloud(path).map_err(|e| with_path(path, e))?;
    let labels = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) {
        read_ply(path)?.scalars.remove(LABEL_PROPERTY).map(|v| v.iter().map(|&x| x != 0.0).collect())
    } else {
        None
    };
    Ok((cloud, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub object_score: f64,
    pub k_used: usize,
    pub converged: bool,
    pub label: Option<bool>,
    pub score_map: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectResults {
    pub objects: Vec<ObjectRecord>,
    pub o_auroc: Option<f64>,
    pub p_auroc: Option<f64>,
}

fn aurocs(objects: LabeledScores, points: LabeledScores) -> (Option<f64>, Option<f64>) {
    let get = |d: LabeledScores| match auroc(&d) {
        Ok(v) => Some(v),
        Err(e) => {
            warn!("{e}");
            None
        }
    };
    (get(objects), get(points))
}

/// Scores every test input, writing a PLY score map per input and `results.json`.
/// AUROCs are reported when every input carries labels.
pub fn cmd_detect(cfg: &RunConfig) -> Result<DetectResults> {
    cfg.validate()?;
    let dir = cfg.out.join(DETECT_DIR);
    ensure_dir(&dir)?;
    if cfg.inputs.test.is_empty() {
        warn!("no test inputs given; writing empty results");
        let results = DetectResults::default();
        write_json(&dir.join(RESULTS_FILE), &results)?;
        return Ok(results);
    }
    let (field, canonical) = load_model(cfg)?;
    let seed = stream_seed(cfg.seed, Stream::Detect);
    let mut results = DetectResults::default();
    let mut objects = LabeledScores::default();
    let mut points = LabeledScores::default();
    let mut all_labeled = true;
    for (i, path) in cfg.inputs.test.iter().enumerate() {
        let id = file_id(path);
        let (cloud, labels) = load_test_cloud(path)?;
        let report = pipeline::detect(&field, &canonical, &cloud, &cfg.detect, &cfg.pam, pasdf::sdf::mix_seed(seed, i as u64, 0))?;
        if !report.converged {
            warn!("'{id}': PAM did not converge; scores are still reported");
        }
        let map = dir.join(format!("{id}.ply"));
        save_cloud(&map, &cloud, Some(&report.per_point_scores))?;
        let label = labels.as_ref().map(|l| l.iter().any(|&x| x));
        match &labels {
            Some(l) if l.len() == cloud.len() => {
                objects.extend(&[report.object_score], &[l.iter().any(|&x| x)])?;
                points.extend(&report.per_point_scores, l)?;
            }
            _ => all_labeled = false,
        }
        results.objects.push(ObjectRecord {
            id,
            object_score: report.object_score,
            k_used: report.k_used,
            converged: report.converged,
            label,
            score_map: map,
        });
    }
    if all_labeled {
        (results.o_auroc, results.p_auroc) = aurocs(objects, points);
    }
    write_json(&dir.join(RESULTS_FILE), &results)?;
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub id: String,
    pub converged: bool,
    pub repaired: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
    pub quality: Option<RepairQuality>,
    /// Chamfer of the aligned input against the same reference.
    pub input_cd: Option<f64>,
    pub grid_resolution: usize,
    pub error: Option<String>,
}

/// Repairs every test input. Failures are recorded per input and the batch continues.
/// References are read in the canonical frame.
pub fn cmd_repair(cfg: &RunConfig) -> Result<Vec<RepairRecord>> {
    cfg.validate()?;
    let dir = cfg.out.join(REPAIR_DIR);
    ensure_dir(&dir)?;
    let (field, canonical) = load_model(cfg)?;
    let seed = stream_seed(cfg.seed, Stream::Repair);
    let mut records = Vec::new();
    for (i, path) in cfg.inputs.test.iter().enumerate() {
        let id = file_id(path);
        let (cloud, _) = load_test_cloud(path)?;
        let reference = match cfg.inputs.references.get(&id) {
            Some(r) => Some(load_cloud(r).map_err(|e| with_path(r, e))?),
            None => None,
        };
        let case_seed = pasdf::sdf::mix_seed(seed, i as u64, 0);
        let pam = pipeline::pam_for(&cfg.pam, cfg.detect.use_pam, case_seed);
        let mut record = RepairRecord {
            id: id.clone(),
            converged: false,
            repaired: None,
            mesh: None,
            quality: None,
            input_cd: None,
            grid_resolution: cfg.repair.repair.grid_resolution,
            error: None,
        };
        match pipeline::repair_one(
            &field,
            &canonical,
            &cloud,
            reference.as_ref(),
            &cfg.repair.repair,
            cfg.repair.emd_subsample,
            pam.as_ref(),
            case_seed,
        ) {
            Ok(r) => {
                let (ply, obj) = (dir.join(format!("{id}.ply")), dir.join(format!("{id}.obj")));
                save_cloud(&ply, &r.outcome.cloud, None)?;
                save_mesh(&obj, &r.outcome.mesh)?;
                record.converged = r.outcome.converged();
                record.repaired = Some(ply);
                record.mesh = Some(obj);
                record.quality = r.quality.map(|q| q.0);
                record.input_cd = r.quality.map(|q| q.1);
            }
            Err(e) => {
                warn!("'{id}': {e}");
                record.error = Some(e.to_string());
            }
        }
        records.push(record);
    }
    write_json(&dir.join("quality.json"), &records)?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub objects: usize,
    pub o_auroc: Option<f64>,
    pub p_auroc: Option<f64>,
}

/// Recomputes O-/P-AUROC from the detection results and score maps on disk.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalSummary> {
    cfg.validate()?;
    let dir = cfg.out.join(DETECT_DIR);
    let results_path = dir.join(RESULTS_FILE);
    let results: DetectResults = serde_json::from_str(
        &std::fs::read_to_string(&results_path).map_err(|e| with_path(&results_path, e.into()))?,
    )?;
    let mut objects = LabeledScores::default();
    let mut points = LabeledScores::default();
    let mut labeled = true;
    for (rec, path) in results.objects.iter().zip(cfg.inputs.test.iter().chain(std::iter::repeat(&PathBuf::new()))) {
        let map = read_ply(&rec.score_map).map_err(|e| with_path(&rec.score_map, e))?;
        let scores = map
            .scalars
            .get("anomaly_score")
            .ok_or_else(|| PasdfError::Format(format!("{}: no anomaly_score property", rec.score_map.display())))?;
        let labels = if path.as_os_str().is_empty() { None } else { load_test_cloud(path)?.1 };
        match (rec.label, labels) {
            (Some(l), Some(pl)) if pl.len() == scores.len() => {
                objects.extend(&[rec.object_score], &[l])?;
                points.extend(scores, &pl)?;
            }
            _ => labeled = false,
        }
    }
    let (o_auroc, p_auroc) = if labeled && !results.objects.is_empty() { aurocs(objects, points) } else { (None, None) };
    let summary = EvalSummary {
        objects: results.objects.len(),
        o_auroc,
        p_auroc,
    };
    write_json(&cfg.out.join("metrics.json"), &summary)?;
    Ok(summary)
}
