//! Spatial machinery: icosphere scan grids, coarse-to-fine refinement
//! neighborhoods, directivity-based pair selection and TDOA tables.

mod cache;
mod icosphere;
mod pairs;
mod tables;

use thiserror::Error;

pub use cache::CacheError;
pub use icosphere::{build_icosphere, build_icosphere_about, max_neighbor_spacing, ScanGrid};
pub use pairs::{all_pairs, select_pairs, tdoa_samples, tdoa_table, PairSelection, PairTable};
pub use tables::{nearest_points, refinement_neighbors, ScanParams, ScanTables};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("at least two microphones are required, got {0}")]
    TooFewMics(usize),
    #[error("no microphone pair shares a visible direction; the array cannot localize")]
    NoPairs,
    #[error("fine level {fine} must exceed coarse level {coarse}")]
    Levels { coarse: u32, fine: u32 },
}
