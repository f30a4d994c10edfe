use std::fmt::Write as _;
use std::path::PathBuf;

use log::{info, warn};
use pasdf::anomaly::evaluate;
use pasdf::geom::compose;
use pasdf::io::{save_cloud, save_mesh, write_ply, PlyData, Shape3d};
use pasdf::sdf::mix_seed;
use pasdf::synth::{bench_cases, canonical_cloud, generate_shape, pose_error, AnomalySpec, CaseRole, ShapeSpec};
use pasdf::{PasdfError, Result};
use serde::{Deserialize, Serialize};

use crate::commands::LABEL_PROPERTY;
use crate::config::{DetectConfig, RunConfig};
use crate::pipeline::{self, stream_seed, Stream, TrainingInput};

pub const BENCH_DIR: &str = "bench";
pub const METRICS_TABLE: &str = "metrics.tsv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub id: String,
    pub role: CaseRole,
    pub anomaly: Option<AnomalySpec>,
    /// Crops are scored too but stay out of the AUROC.
    pub object_score: Option<f64>,
    /// Detection cases only.
    pub object_score_no_pam: Option<f64>,
    pub converged: bool,
    /// Symmetry-aware residual of the PAM estimate: degrees and bbox-diagonal fraction.
    pub rotation_error_deg: f64,
    pub translation_error: f64,
    pub repair: Option<CaseRepair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRepair {
    pub cd: f64,
    pub cd_per_point: f64,
    pub emd: f64,
    /// Chamfer of the aligned input against the same reference.
    pub input_cd: f64,
    /// Object score of the repaired cloud, detected again from scratch.
    pub redetect_score: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeResult {
    pub shape: String,
    pub spec: ShapeSpec,
    pub final_loss: Option<f64>,
    pub o_auroc: Option<f64>,
    pub p_auroc: Option<f64>,
    pub o_auroc_no_pam: Option<f64>,
    pub p_auroc_no_pam: Option<f64>,
    /// Means over the repaired cases.
    pub cd: Option<f64>,
    pub emd: Option<f64>,
    pub cases: Vec<CaseResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub seed: u64,
    pub shapes: Vec<ShapeResult>,
}

impl BenchSummary {
    pub fn mean_o_auroc(&self, with_pam: bool) -> Option<f64> {
        let v: Option<Vec<f64>> = self
            .shapes
            .iter()
            .map(|s| if with_pam { s.o_auroc } else { s.o_auroc_no_pam })
            .collect();
        v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// One row per shape; identical inputs give identical bytes.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        let mut out = String::from("shape\to_auroc\tp_auroc\to_auroc_no_pam\tp_auroc_no_pam\tcd\temd\tstatus\n");
        for s in &self.shapes {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.shape,
                fmt(s.o_auroc),
                fmt(s.p_auroc),
                fmt(s.o_auroc_no_pam),
                fmt(s.p_auroc_no_pam),
                fmt(s.cd),
                fmt(s.emd),
                if s.error.is_some() { "failed" } else { "ok" }
            );
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
struct ManifestEntry {
    id: String,
    shape: String,
    role: CaseRole,
    anomaly: Option<AnomalySpec>,
    seed: u64,
    cloud: Option<PathBuf>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn run_shape(cfg: &RunConfig, index: usize, spec: &ShapeSpec, seed: u64, dir: Option<&PathBuf>) -> Result<ShapeResult> {
    let b = &cfg.bench;
    let shape_seed = mix_seed(seed, 20, index as u64);
    let mesh = generate_shape(spec, shape_seed)?;
    let canonical = canonical_cloud(spec, b.canonical_points, shape_seed)?;
    let prepare_cfg = crate::config::PrepareConfig {
        queries: b.queries,
        ..cfg.prepare.clone()
    };
    let input = TrainingInput {
        id: spec.name().to_string(),
        shape: Shape3d::Mesh(mesh.clone()),
    };
    let prepared = pipeline::prepare(&[input], None, &prepare_cfg, &b.pam, mix_seed(shape_seed, 1, 0))?;
    let (field, outcome) = pipeline::train_field(
        &prepared.samples,
        prepared.normalization,
        &b.encoding,
        &b.train,
        mix_seed(shape_seed, 2, 0),
    )?;
    info!("{}: trained, final loss {:?}", spec.name(), outcome.final_loss());

    let cases = bench_cases(spec, &b.cases, mix_seed(shape_seed, 3, 0))?;
    let diag = pasdf::synth::bbox_diagonal(spec);
    let no_pam = DetectConfig {
        use_pam: false,
        ..cfg.detect.clone()
    };
    let repair_cfg = pasdf::repair::RepairConfig {
        grid_resolution: b.grid_resolution,
        ..cfg.repair.repair
    };
    let mut results = Vec::new();
    let (mut reports, mut reports_no_pam, mut object_labels, mut point_labels) = (vec![], vec![], vec![], vec![]);
    let (mut cds, mut emds) = (vec![], vec![]);
    for case in &cases {
        let case_seed = mix_seed(case.seed, 30, 0);
        if let Some(dir) = dir {
            let mut data = PlyData {
                points: case.cloud.points().to_vec(),
                ..PlyData::default()
            };
            data.scalars
                .insert(LABEL_PROPERTY.into(), case.labels.iter().map(|&l| f64::from(u8::from(l))).collect());
            write_ply(&dir.join(format!("{}.ply", case.id)), &data)?;
        }
        let mut result = CaseResult {
            id: case.id.clone(),
            role: case.role,
            anomaly: case.anomaly,
            object_score: None,
            object_score_no_pam: None,
            converged: false,
            rotation_error_deg: f64::NAN,
            translation_error: f64::NAN,
            repair: None,
        };
        let report = pipeline::detect(&field, &canonical, &case.cloud, &cfg.detect, &b.pam, case_seed)?;
        let (rot, trans) = pose_error(spec, &compose(&report.transform, &case.pose));
        result.rotation_error_deg = rot.to_degrees();
        result.translation_error = trans / diag;
        result.converged = report.converged;
        result.object_score = Some(report.object_score);
        if case.role != CaseRole::Crop {
            let ablated = pipeline::detect(&field, &canonical, &case.cloud, &no_pam, &b.pam, case_seed)?;
            result.object_score_no_pam = Some(ablated.object_score);
            object_labels.push(case.is_anomalous());
            point_labels.push(case.labels.clone());
            reports_no_pam.push(ablated);
        }
        if case.is_anomalous() {
            let pam = pipeline::pam_for(&b.pam, cfg.detect.use_pam, mix_seed(case_seed, 1, 0));
            match pipeline::repair_one(
                &field,
                &canonical,
                &case.cloud,
                Some(&case.reference),
                &repair_cfg,
                cfg.repair.emd_subsample,
                pam.as_ref(),
                mix_seed(case_seed, 2, 0),
            ) {
                Ok(r) => {
                    let (q, input_cd) = r.quality.expect("reference given");
                    let again = pipeline::detect(&field, &canonical, &r.outcome.cloud, &cfg.detect, &b.pam, mix_seed(case_seed, 3, 0))?;
                    cds.push(q.cd);
                    emds.push(q.emd_per_point);
                    if let Some(dir) = dir {
                        save_cloud(&dir.join(format!("{}-repaired.ply", case.id)), &r.outcome.cloud, None)?;
                        save_mesh(&dir.join(format!("{}-repaired.obj", case.id)), &r.outcome.mesh)?;
                    }
                    result.repair = Some(CaseRepair {
                        cd: q.cd,
                        cd_per_point: q.cd_per_point,
                        emd: q.emd_per_point,
                        input_cd,
                        redetect_score: again.object_score,
                        converged: r.outcome.converged(),
                    });
                }
                Err(e) => warn!("{}: repair failed: {e}", case.id),
            }
        }
        if case.role != CaseRole::Crop {
            reports.push(report);
        }
        results.push(result);
    }
    let (o, p) = evaluate(&reports, &object_labels, &point_labels)?;
    let (o_np, p_np) = evaluate(&reports_no_pam, &object_labels, &point_labels)?;
    Ok(ShapeResult {
        shape: spec.name().to_string(),
        spec: *spec,
        final_loss: outcome.final_loss(),
        o_auroc: Some(o),
        p_auroc: Some(p),
        o_auroc_no_pam: Some(o_np),
        p_auroc_no_pam: Some(p_np),
        cd: mean(&cds),
        emd: mean(&emds),
        cases: results,
        error: None,
    })
}

/// Generates every benchmark shape and case, runs prepare, train, detect (with
/// and without PAM) and repair, and writes the manifest, the metrics table and
/// a JSON summary under `<out>/bench`. A failing shape is marked and skipped.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchSummary> {
    cfg.validate()?;
    let seed = stream_seed(cfg.seed, Stream::Bench);
    let dir = cfg.out.join(BENCH_DIR);
    std::fs::create_dir_all(&dir)?;
    let assets = cfg.bench.write_assets.then(|| dir.clone());
    let mut summary = BenchSummary {
        seed: cfg.seed,
        shapes: Vec::new(),
    };
    for (i, spec) in cfg.bench.cases.shapes.iter().enumerate() {
        let started = std::time::Instant::now();
        let result = run_shape(cfg, i, spec, seed, assets.as_ref()).unwrap_or_else(|e: PasdfError| {
            warn!("{}: benchmark row failed: {e}", spec.name());
            ShapeResult {
                shape: spec.name().to_string(),
                spec: *spec,
                final_loss: None,
                o_auroc: None,
                p_auroc: None,
                o_auroc_no_pam: None,
                p_auroc_no_pam: None,
                cd: None,
                emd: None,
                cases: Vec::new(),
                error: Some(e.to_string()),
            }
        });
        info!("{}: done in {:.1?}", spec.name(), started.elapsed());
        summary.shapes.push(result);
    }
    let manifest: Vec<ManifestEntry> = summary
        .shapes
        .iter()
        .flat_map(|s| {
            s.cases.iter().map(|c| ManifestEntry {
                id: c.id.clone(),
                shape: s.shape.clone(),
                role: c.role,
                anomaly: c.anomaly,
                seed,
                cloud: assets.as_ref().map(|d| d.join(format!("{}.ply", c.id))),
            })
        })
        .collect();
    let manifest = serde_json::json!({ "seed": cfg.seed, "config": cfg.bench, "cases": manifest });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    std::fs::write(dir.join(METRICS_TABLE), summary.table())?;
    Ok(summary)
}
