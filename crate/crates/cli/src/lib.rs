//! Configuration, pipeline orchestration and file-based commands behind the `pasdf` binary.

pub mod bench;
pub mod commands;
pub mod config;
pub mod pipeline;

use pasdf::PasdfError;

pub use bench::{cmd_bench, BenchSummary};
pub use commands::{cmd_detect, cmd_eval, cmd_prepare, cmd_repair, cmd_train};
pub use config::RunConfig;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_ARTIFACT: i32 = 4;
pub const EXIT_VALIDATION: i32 = 5;

pub fn exit_code(e: &PasdfError) -> i32 {
    match e {
        PasdfError::InvalidInput(_) | PasdfError::Format(_) | PasdfError::Io(_) | PasdfError::Json(_) => EXIT_INPUT,
        PasdfError::NonFiniteLoss { .. }
        | PasdfError::NonFiniteField { .. }
        | PasdfError::CoarseAlignmentFailed { .. }
        | PasdfError::UndefinedMetric(_)
        | PasdfError::RepairFailed(_) => EXIT_NUMERIC,
        PasdfError::ArtifactMismatch(_) => EXIT_ARTIFACT,
        PasdfError::InvalidParameter(_) => EXIT_VALIDATION,
    }
}

/// Runs `f` on a pool of `threads` workers (the global pool when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, PasdfError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| PasdfError::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
