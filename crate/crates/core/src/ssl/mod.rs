//! Sound source localization: MCRA noise tracking, weighted GCC-PHAT and
//! the coarse-to-fine SRP-PHAT scan.

mod gcc;
mod mcra;
mod scan;

use std::sync::Arc;

pub use gcc::{gcc_phat, CrossCorrelations, GccPhat};
pub use mcra::{mcra_update, NoiseEstimate};
pub use scan::{srp_power, srp_scan, ScanCounters, ScanMode};

use crate::audio_io::SpectralFrame;
use crate::config::PipelineConfig;
use crate::geometry::ScanTables;
use crate::Vec3;

/// One candidate direction from a frame's scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialDoa {
    pub direction: Vec3,
    /// SRP value averaged over the table's pairs.
    pub power: f64,
    pub frame_index: u64,
    /// 1 for the strongest candidate.
    pub rank: usize,
    /// Index into the fine grid.
    pub grid_index: usize,
}

/// Per-frame localization stage. Owns the noise estimate, which is updated
/// in frame order before the cross-correlations are computed.
pub struct Localizer {
    tables: Arc<ScanTables>,
    gcc: GccPhat,
    noise: NoiseEstimate,
    n_potential: usize,
    weighting: bool,
    mode: ScanMode,
    pub counters: ScanCounters,
}

impl Localizer {
    pub fn new(cfg: &PipelineConfig, tables: Arc<ScanTables>) -> Self {
        let n_bins = cfg.general.frame_size_samples / 2 + 1;
        Self {
            gcc: GccPhat::new(cfg.general.frame_size_samples, cfg.ssl.interpolation_rate),
            noise: NoiseEstimate::new(cfg.mcra.clone(), cfg.general.mics.len(), n_bins),
            n_potential: cfg.ssl.n_potential_doas,
            weighting: cfg.ssl.snr_weighting,
            mode: if cfg.ssl.hierarchical {
                ScanMode::Hierarchical
            } else {
                ScanMode::Exhaustive
            },
            tables,
            counters: ScanCounters::default(),
        }
    }

    pub fn tables(&self) -> &ScanTables {
        &self.tables
    }

    pub fn noise(&self) -> &NoiseEstimate {
        &self.noise
    }

    pub fn process(&mut self, frame: &SpectralFrame) -> Vec<PotentialDoa> {
        self.noise.update(frame);
        let weights = self.weighting.then_some(&self.noise);
        let mut cc = self.gcc.compute(frame, weights, self.tables.pairs());
        self.counters.pairs_computed += cc.values.len() as u64;
        srp_scan(&mut cc, &self.tables, self.n_potential, self.mode, &mut self.counters)
    }
}
