use thiserror::Error;

pub type Result<T, E = PasdfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PasdfError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("coarse alignment failed: {found} correspondences, need at least {required}")]
    CoarseAlignmentFailed { found: usize, required: usize },

    #[error("non-finite training loss at epoch {epoch}, batch {batch} (parameter norm {param_norm})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        param_norm: f64,
    },

    #[error("non-finite field value at grid vertex ({i}, {j}, {k})")]
    NonFiniteField { i: usize, j: usize, k: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("repair failed: {0}")]
    RepairFailed(String),

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PasdfError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        PasdfError::InvalidParameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        PasdfError::InvalidInput(msg.into())
    }
}
