use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pasdf::pam::PamParams;
use pasdf::repair::{RepairConfig, DEFAULT_EMD_SUBSAMPLE};
use pasdf::sampling::QueryConfig;
use pasdf::sdf::{EncodingConfig, TrainConfig};
use pasdf::synth::BenchConfig;
use pasdf::{PasdfError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Normal training meshes or clouds; ids are file stems.
    pub train: Vec<PathBuf>,
    /// Clouds to score or repair. A PLY vertex property `label` marks anomalous points.
    pub test: Vec<PathBuf>,
    /// Defect-free references for repair quality, by test id.
    pub references: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub queries: QueryConfig,
    /// Margin left on each side of the longest axis inside the unit cube.
    pub padding: f64,
    /// Surface points drawn from mesh inputs to stand in for them during alignment.
    pub align_points: usize,
    /// Neighbours for normal estimation on cloud inputs.
    pub normal_neighbors: usize,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            queries: QueryConfig::default(),
            padding: 0.125,
            align_points: 4096,
            normal_neighbors: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    /// Points averaged for the object score.
    pub top_k: usize,
    /// Identity alignment when false.
    pub use_pam: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            top_k: pasdf::anomaly::DEFAULT_TOP_K,
            use_pam: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepairSettings {
    #[serde(flatten)]
    pub repair: RepairConfig,
    pub emd_subsample: usize,
}

impl Default for RepairSettings {
    fn default() -> Self {
        RepairSettings {
            repair: RepairConfig::default(),
            emd_subsample: DEFAULT_EMD_SUBSAMPLE,
        }
    }
}

/// Benchmark cases plus the desk-scale training and repair settings used for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub cases: BenchConfig,
    pub queries: QueryConfig,
    pub encoding: EncodingConfig,
    pub train: TrainConfig,
    pub grid_resolution: usize,
    /// Alignment used for every bench case. The Chamfer threshold is tighter than
    /// the top-level default: at 0.016 a box turned by a quarter turn is accepted.
    pub pam: PamParams,
    /// Points in each shape's canonical training cloud.
    pub canonical_points: usize,
    /// Write every generated cloud and repaired output under `<out>/bench`.
    pub write_assets: bool,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            cases: BenchConfig::default(),
            queries: QueryConfig::default(),
            encoding: EncodingConfig::default(),
            train: TrainConfig {
                learning_rate: 1e-3,
                epochs: 300,
                batch_size: 512,
                hidden_width: 64,
                dropout: 0.0,
                ..TrainConfig::default()
            },
            grid_resolution: 64,
            pam: PamParams {
                tau: 0.002,
                ..PamParams::default()
            },
            canonical_points: 2000,
            write_assets: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream; module-level seed fields are derived from it.
    pub seed: u64,
    /// Training id used as the canonical pose; the first id in sorted order when unset.
    pub canonical: Option<String>,
    pub out: PathBuf,
    pub inputs: Inputs,
    pub prepare: PrepareConfig,
    pub encoding: EncodingConfig,
    pub train: TrainConfig,
    pub pam: PamParams,
    pub detect: DetectConfig,
    pub repair: RepairSettings,
    pub bench: BenchSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            canonical: None,
            out: PathBuf::from("pasdf-out"),
            inputs: Inputs::default(),
            prepare: PrepareConfig::default(),
            encoding: EncodingConfig::default(),
            train: TrainConfig::default(),
            pam: PamParams::default(),
            detect: DetectConfig::default(),
            repair: RepairSettings::default(),
            bench: BenchSettings::default(),
        }
    }
}

impl RunConfig {
    /// Reads a JSON config. Unknown fields and malformed JSON are validation errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| PasdfError::InvalidParameter(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Every range check of the owning modules, before any work starts.
    pub fn validate(&self) -> Result<()> {
        let p = &self.prepare;
        p.queries.validate()?;
        if !(0.0..0.5).contains(&p.padding) {
            return Err(PasdfError::InvalidParameter("prepare.padding must lie in [0, 0.5)".into()));
        }
        if p.align_points < 16 || p.normal_neighbors < 3 {
            return Err(PasdfError::InvalidParameter(
                "prepare.align_points must be >= 16 and prepare.normal_neighbors >= 3".into(),
            ));
        }
        self.train.validate()?;
        self.pam.validate()?;
        if self.detect.top_k == 0 {
            return Err(PasdfError::InvalidParameter("detect.top_k must be at least 1".into()));
        }
        self.repair.repair.validate()?;
        if self.repair.emd_subsample == 0 {
            return Err(PasdfError::InvalidParameter("repair.emd_subsample must be at least 1".into()));
        }
        let b = &self.bench;
        b.cases.validate()?;
        b.queries.validate()?;
        b.train.validate()?;
        b.pam.validate()?;
        RepairConfig {
            grid_resolution: b.grid_resolution,
            ..RepairConfig::default()
        }
        .validate()?;
        if b.canonical_points < 16 {
            return Err(PasdfError::InvalidParameter("bench.canonical_points must be at least 16".into()));
        }
        Ok(())
    }
}
