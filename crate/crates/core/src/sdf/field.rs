use nalgebra::Point3;

use super::encoding::EncodingConfig;
use super::model::SdfModel;
use crate::error::{PasdfError, Result};
use crate::sampling::NormalizationRecord;

/// A trained model together with the frame it was trained in.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfField {
    pub model: SdfModel,
    pub encoding: EncodingConfig,
    /// Canonical frame → normalized model frame.
    pub normalization: NormalizationRecord,
}

impl SdfField {
    pub fn new(model: SdfModel, encoding: EncodingConfig, normalization: NormalizationRecord) -> Result<Self> {
        if encoding.dim() != model.architecture().input_dim {
            return Err(PasdfError::ArtifactMismatch(format!(
                "encoding produces {} values but the model expects {}",
                encoding.dim(),
                model.architecture().input_dim
            )));
        }
        normalization.validate()?;
        Ok(SdfField {
            model,
            encoding,
            normalization,
        })
    }

    /// Field values at points already in the normalized frame.
    pub fn eval_normalized(&self, points: &[Point3<f64>]) -> Result<Vec<f64>> {
        self.model.predict(points, &self.encoding)
    }

    /// Field values (normalized units) at canonical-frame points.
    pub fn eval(&self, points: &[Point3<f64>]) -> Result<Vec<f64>> {
        let normalized: Vec<_> = points.iter().map(|p| self.normalization.apply(p)).collect();
        self.eval_normalized(&normalized)
    }
}
