//! Repair templates from the learned field (marching cubes, surface sampling)
//! and the repair-quality metrics.

mod assignment;
mod marching_cubes;
mod pipeline;
mod quality;
mod tables;

pub use assignment::{emd, emd_assignment, hungarian};
pub use marching_cubes::{marching_cubes, marching_cubes_values, GridSpec, MIN_GRID_RESOLUTION};
pub use pipeline::{extract_surface, repair, repair_grid, RepairConfig, RepairOutcome};
pub use quality::{repair_quality, RepairQuality, DEFAULT_EMD_SUBSAMPLE};
