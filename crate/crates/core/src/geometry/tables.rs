use super::{
    all_pairs, build_icosphere_about, max_neighbor_spacing, select_pairs, tdoa_table, GeometryError, PairTable,
    ScanGrid,
};
use crate::config::{fit_plane, MicSpec, PipelineConfig};
use crate::Vec3;

/// Radius of a refinement neighborhood, as a multiple of the coarse grid's
/// largest nearest-neighbor spacing.
pub const REFINE_RADIUS_FACTOR: f64 = 1.5;

/// For each coarse point, the fine points within `radius` radians.
pub fn refinement_neighbors(coarse: &ScanGrid, fine: &ScanGrid, radius: f64) -> Vec<Vec<usize>> {
    let cos_r = radius.min(std::f64::consts::PI).cos();
    coarse
        .points
        .iter()
        .map(|c| {
            fine.points
                .iter()
                .enumerate()
                .filter(|(_, f)| c.dot(f) >= cos_r - 1e-12)
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

/// For each point of `fine`, the index of the closest point of `coarse`.
pub fn nearest_points(coarse: &ScanGrid, fine: &ScanGrid) -> Vec<usize> {
    fine.points.iter().map(|f| coarse.nearest(f)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanParams {
    pub coarse_level: u32,
    pub fine_level: u32,
    /// Hemisphere to keep, if any (the array plane normal for planar arrays).
    pub up: Option<Vec3>,
    pub prune_pairs: bool,
    pub fs: f64,
    pub c: f64,
    pub c_uncertainty: f64,
    pub interpolation_rate: usize,
    pub frame_size: usize,
}

impl ScanParams {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        let up = cfg.half_sphere().then(|| fit_plane(&cfg.general.mics).1);
        Self {
            coarse_level: cfg.ssl.coarse_level,
            fine_level: cfg.ssl.fine_level,
            up,
            prune_pairs: cfg.ssl.prune_pairs,
            fs: cfg.general.fs_processing_hz as f64,
            c: cfg.general.speed_of_sound_mps,
            c_uncertainty: cfg.general.speed_of_sound_uncertainty_mps,
            interpolation_rate: cfg.ssl.interpolation_rate,
            frame_size: cfg.general.frame_size_samples,
        }
    }
}

/// Everything the SRP scan needs, built once at startup.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTables {
    pub coarse: ScanGrid,
    pub fine: ScanGrid,
    pub fine_table: PairTable,
    /// Coarse-grid table whose windows span the TDOAs of every fine point
    /// in the coarse point's cell, so a coarse value bounds its cell.
    pub coarse_table: PairTable,
    /// `neighbors[coarse]` = fine indices searched after a coarse hit.
    pub neighbors: Vec<Vec<usize>>,
    pub refine_radius: f64,
}

impl ScanTables {
    pub fn build(mics: &[MicSpec], params: &ScanParams) -> Result<Self, GeometryError> {
        if params.fine_level <= params.coarse_level {
            return Err(GeometryError::Levels {
                coarse: params.coarse_level,
                fine: params.fine_level,
            });
        }
        let coarse = build_icosphere_about(params.coarse_level, params.up);
        let fine = build_icosphere_about(params.fine_level, params.up);

        let fine_sel = if params.prune_pairs {
            select_pairs(mics, &fine)?
        } else {
            all_pairs(mics.len(), &fine)?
        };
        let fine_table = tdoa_table(
            mics,
            &fine_sel,
            &fine,
            params.fs,
            params.c,
            params.c_uncertainty,
            params.interpolation_rate,
            params.frame_size,
        );

        let cell = nearest_points(&coarse, &fine);
        let mut coarse_sel = fine_sel.clone();
        coarse_sel.visible = vec![vec![false; coarse.len()]; fine_sel.pairs.len()];
        let mut coarse_table = tdoa_table(
            mics,
            &coarse_sel,
            &coarse,
            params.fs,
            params.c,
            params.c_uncertainty,
            params.interpolation_rate,
            params.frame_size,
        );
        for p in 0..fine_table.n_pairs() {
            for (f, &c) in cell.iter().enumerate() {
                coarse_table.lag_lo[p][c] = coarse_table.lag_lo[p][c].min(fine_table.lag_lo[p][f]);
                coarse_table.lag_hi[p][c] = coarse_table.lag_hi[p][c].max(fine_table.lag_hi[p][f]);
                coarse_table.visible[p][c] |= fine_table.visible[p][f];
            }
        }

        let refine_radius = REFINE_RADIUS_FACTOR * max_neighbor_spacing(&coarse);
        let neighbors = refinement_neighbors(&coarse, &fine, refine_radius);
        Ok(Self {
            coarse,
            fine,
            fine_table,
            coarse_table,
            neighbors,
            refine_radius,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.fine_table.pairs
    }

    pub fn mean_neighborhood(&self) -> f64 {
        self.neighbors.iter().map(Vec::len).sum::<usize>() as f64 / self.neighbors.len() as f64
    }
}
