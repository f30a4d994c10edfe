use serde::{Deserialize, Serialize};

use crate::error::{PasdfError, Result};

/// `|clamp(pred, −d_max, d_max) − target|`. Only the prediction is clamped.
pub fn clamped_l1_loss(pred: f64, target: f64, d_max: f64) -> f64 {
    (pred.clamp(-d_max, d_max) - target).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub d_max: f64,
    /// Also clamp the target to [−d_max, d_max] before comparing.
    pub clamp_target: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            d_max: 0.1,
            clamp_target: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max > 0.0) || !self.d_max.is_finite() {
            return Err(PasdfError::param("d_max must be positive"));
        }
        Ok(())
    }

    pub(crate) fn target(&self, target: f64) -> f64 {
        if self.clamp_target {
            target.clamp(-self.d_max, self.d_max)
        } else {
            target
        }
    }

    /// Per-sample loss and its subgradient with respect to the prediction.
    pub(crate) fn eval(&self, pred: f64, target: f64) -> (f64, f64) {
        let u = pred.clamp(-self.d_max, self.d_max) - self.target(target);
        let inside = if pred.abs() <= self.d_max { 1.0 } else { 0.0 };
        let sign = if u > 0.0 {
            1.0
        } else if u < 0.0 {
            -1.0
        } else {
            0.0
        };
        (u.abs(), sign * inside)
    }
}
