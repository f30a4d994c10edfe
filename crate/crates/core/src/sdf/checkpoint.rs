//! Binary model checkpoints (`PASDF001`, little-endian f32) with a JSON sidecar.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::encoding::EncodingConfig;
use super::model::{Architecture, Layer, SdfModel};
use super::train::TrainConfig;
use crate::error::{PasdfError, Result};
use crate::sampling::NormalizationRecord;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PASDF001";
const NO_SKIP: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub format: String,
    pub architecture: Architecture,
    pub encoding: EncodingConfig,
    /// Maps the canonical sample's original coordinates into the model frame.
    pub normalization: NormalizationRecord,
    pub train: TrainConfig,
    pub final_loss: Option<f64>,
}

impl CheckpointMetadata {
    pub fn new(
        model: &SdfModel,
        encoding: EncodingConfig,
        normalization: NormalizationRecord,
        train: TrainConfig,
        final_loss: Option<f64>,
    ) -> Self {
        CheckpointMetadata {
            format: String::from_utf8_lossy(CHECKPOINT_MAGIC).into_owned(),
            architecture: *model.architecture(),
            encoding,
            normalization,
            train,
            final_loss,
        }
    }
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f32s<'a>(w: &mut impl Write, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    for &v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 4 * n];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

fn truncated(e: std::io::Error) -> PasdfError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        PasdfError::ArtifactMismatch("checkpoint is truncated".into())
    } else {
        e.into()
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| PasdfError::param(format!("{what} {v} does not fit the checkpoint format")))
}

/// Architecture descriptor, then every layer's direction (row-major), gain and bias.
pub fn write_model(w: &mut impl Write, model: &SdfModel) -> Result<()> {
    let arch = model.architecture();
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(w, to_u32(arch.input_dim, "input_dim")?)?;
    write_u32(w, to_u32(arch.hidden_width, "hidden_width")?)?;
    write_u32(w, to_u32(arch.num_layers, "num_layers")?)?;
    write_u32(w, arch.skip_layer.map_or(Ok(NO_SKIP), |k| to_u32(k, "skip_layer"))?)?;
    w.write_all(&arch.dropout.to_le_bytes())?;
    for layer in model.layers() {
        write_f32s(w, layer.direction.iter())?;
        write_f32s(w, layer.gain.iter())?;
        write_f32s(w, layer.bias.iter())?;
    }
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<SdfModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(PasdfError::ArtifactMismatch("not a PASDF001 checkpoint".into()));
    }
    let input_dim = read_u32(r)? as usize;
    let hidden_width = read_u32(r)? as usize;
    let num_layers = read_u32(r)? as usize;
    let skip = read_u32(r)?;
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    let dropout = f64::from_le_bytes(b);
    let arch = Architecture {
        input_dim,
        hidden_width,
        num_layers,
        skip_layer: (skip != NO_SKIP).then_some(skip as usize),
        dropout,
    };
    arch.validate().map_err(|e| PasdfError::ArtifactMismatch(format!("bad architecture in checkpoint: {e}")))?;
    let mut layers = Vec::with_capacity(num_layers);
    for l in 0..num_layers {
        let (out, fan_in) = arch.layer_shape(l);
        let direction = Array2::from_shape_vec((out, fan_in), read_f32s(r, out * fan_in)?).expect("sized read");
        let gain = Array1::from(read_f32s(r, out)?);
        let bias = Array1::from(read_f32s(r, out)?);
        layers.push(Layer { direction, gain, bias });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(PasdfError::ArtifactMismatch("trailing bytes after checkpoint parameters".into()));
    }
    SdfModel::from_layers(arch, layers)
}

/// Sidecar path: `model.bin` → `model.json`.
pub fn metadata_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_checkpoint(path: &Path, model: &SdfModel, meta: &CheckpointMetadata) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    let json = serde_json::to_string_pretty(meta)?;
    std::fs::write(metadata_path(path), json + "\n")?;
    Ok(())
}

/// Loads both files and checks that they describe the same network.
pub fn load_checkpoint(path: &Path) -> Result<(SdfModel, CheckpointMetadata)> {
    let model = read_model(&mut BufReader::new(File::open(path)?))?;
    let meta: CheckpointMetadata = serde_json::from_str(&std::fs::read_to_string(metadata_path(path))?)?;
    let (a, b) = (model.architecture(), &meta.architecture);
    let same = a.input_dim == b.input_dim
        && a.hidden_width == b.hidden_width
        && a.num_layers == b.num_layers
        && a.skip_layer == b.skip_layer
        && a.dropout == b.dropout;
    if !same {
        return Err(PasdfError::ArtifactMismatch(format!(
            "checkpoint architecture {a:?} disagrees with metadata {b:?}"
        )));
    }
    if meta.encoding.dim() != a.input_dim {
        return Err(PasdfError::ArtifactMismatch(format!(
            "encoding produces {} values but the model expects {}",
            meta.encoding.dim(),
            a.input_dim
        )));
    }
    Ok((model, meta))
}

/// Rounds every parameter to f32, which is what a save/load cycle does.
pub fn quantize(model: &SdfModel) -> SdfModel {
    let mut q = model.clone();
    for layer in q.layers_mut() {
        for v in layer.direction.iter_mut().chain(layer.gain.iter_mut()).chain(layer.bias.iter_mut()) {
            *v = f64::from(*v as f32);
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SdfModel {
        SdfModel::new(Architecture::new(39, 16), 3).unwrap()
    }

    #[test]
    fn round_trip_equals_f32_rounding() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let loaded = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded, quantize(&m));
        let arch = m.architecture();
        assert_eq!(buf.len(), 8 + 16 + 8 + 4 * arch.parameter_count());
    }

    #[test]
    fn second_write_is_byte_identical() {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_model(&mut a, &model()).unwrap();
        write_model(&mut b, &read_model(&mut a.as_slice()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_inputs_are_artifact_mismatches() {
        let mut buf = Vec::new();
        write_model(&mut buf, &model()).unwrap();
        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_model(&mut &truncated[..]), Err(PasdfError::ArtifactMismatch(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(&mut bad.as_slice()), Err(PasdfError::ArtifactMismatch(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_model(&mut long.as_slice()), Err(PasdfError::ArtifactMismatch(_))));
    }

    #[test]
    fn metadata_must_agree_with_binary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let m = model();
        let meta = CheckpointMetadata::new(&m, EncodingConfig::default(), NormalizationRecord::default(), TrainConfig::default(), Some(0.01));
        save_checkpoint(&path, &m, &meta).unwrap();
        let (loaded, loaded_meta) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, quantize(&m));
        assert_eq!(loaded_meta, meta);

        let mut wrong = meta.clone();
        wrong.architecture.hidden_width = 32;
        std::fs::write(metadata_path(&path), serde_json::to_string(&wrong).unwrap()).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(PasdfError::ArtifactMismatch(_))));

        let mut wrong = meta;
        wrong.encoding = EncodingConfig::identity();
        std::fs::write(metadata_path(&path), serde_json::to_string(&wrong).unwrap()).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(PasdfError::ArtifactMismatch(_))));
    }
}
