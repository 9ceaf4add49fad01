use super::{GeometryError, ScanGrid};
use crate::config::MicSpec;
use crate::Vec3;

/// Microphone pairs kept for cross-correlation, with per-pair visibility
/// over the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSelection {
    pub pairs: Vec<(usize, usize)>,
    /// `visible[pair][point]`
    pub visible: Vec<Vec<bool>>,
}

/// Keep pair (i, j) iff some grid direction lies strictly inside both
/// microphones' fields of view. Omnidirectional pairs are always kept.
pub fn select_pairs(mics: &[MicSpec], grid: &ScanGrid) -> Result<PairSelection, GeometryError> {
    if mics.len() < 2 {
        return Err(GeometryError::TooFewMics(mics.len()));
    }
    let mut pairs = Vec::new();
    let mut visible = Vec::new();
    for i in 0..mics.len() {
        for j in i + 1..mics.len() {
            let mask: Vec<bool> = grid
                .points
                .iter()
                .map(|d| mics[i].sees_strictly(d) && mics[j].sees_strictly(d))
                .collect();
            if mask.iter().any(|&v| v) {
                pairs.push((i, j));
                visible.push(mask);
            }
        }
    }
    if pairs.is_empty() {
        return Err(GeometryError::NoPairs);
    }
    Ok(PairSelection { pairs, visible })
}

/// Every pair, visible everywhere (no directivity pruning).
pub fn all_pairs(n_mics: usize, grid: &ScanGrid) -> Result<PairSelection, GeometryError> {
    if n_mics < 2 {
        return Err(GeometryError::TooFewMics(n_mics));
    }
    let pairs: Vec<(usize, usize)> = (0..n_mics)
        .flat_map(|i| (i + 1..n_mics).map(move |j| (i, j)))
        .collect();
    let visible = vec![vec![true; grid.len()]; pairs.len()];
    Ok(PairSelection { pairs, visible })
}

/// Delay of microphone `j` relative to microphone `i` for a far-field source
/// in direction `dir`, in samples at `fs`.
pub fn tdoa_samples(mics: &[MicSpec], i: usize, j: usize, dir: &Vec3, fs: f64, c: f64) -> f64 {
    fs * (mics[i].position() - mics[j].position()).dot(dir) / c
}

/// Per-pair TDOA lookup over a grid.
///
/// Lags are in interpolated-sample units (`interpolation_rate` per sample)
/// and index a circular cross-correlation of length `corr_len`. Each entry
/// carries a window `[lag_lo, lag_hi]` covering the speed-of-sound and
/// position uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    pub pairs: Vec<(usize, usize)>,
    pub n_points: usize,
    pub interpolation_rate: usize,
    pub corr_len: usize,
    /// Fractional TDOA in samples at the processing rate, `[pair][point]`.
    pub tdoa: Vec<Vec<f64>>,
    /// Nominal lag rounded to the nearest interpolated index.
    pub lag: Vec<Vec<i32>>,
    pub lag_lo: Vec<Vec<i32>>,
    pub lag_hi: Vec<Vec<i32>>,
    pub visible: Vec<Vec<bool>>,
    pub max_tdoa_samples: Vec<f64>,
}

impl PairTable {
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Position of a signed lag inside the circular correlation buffer.
    #[inline]
    pub fn wrap(&self, lag: i32) -> usize {
        lag.rem_euclid(self.corr_len as i32) as usize
    }
}

#[allow(clippy::too_many_arguments)]
pub fn tdoa_table(
    mics: &[MicSpec],
    selection: &PairSelection,
    grid: &ScanGrid,
    fs: f64,
    c: f64,
    c_uncertainty: f64,
    interpolation_rate: usize,
    frame_size: usize,
) -> PairTable {
    let rate = interpolation_rate as f64;
    let n = selection.pairs.len();
    let mut table = PairTable {
        pairs: selection.pairs.clone(),
        n_points: grid.len(),
        interpolation_rate,
        corr_len: frame_size * interpolation_rate,
        tdoa: Vec::with_capacity(n),
        lag: Vec::with_capacity(n),
        lag_lo: Vec::with_capacity(n),
        lag_hi: Vec::with_capacity(n),
        visible: selection.visible.clone(),
        max_tdoa_samples: Vec::with_capacity(n),
    };
    for &(i, j) in &selection.pairs {
        let baseline = mics[i].position() - mics[j].position();
        let slack = fs * (mics[i].sigma_pos_m + mics[j].sigma_pos_m) / (c - c_uncertainty);
        let mut tdoa = Vec::with_capacity(grid.len());
        let mut lag = Vec::with_capacity(grid.len());
        let mut lo = Vec::with_capacity(grid.len());
        let mut hi = Vec::with_capacity(grid.len());
        for d in &grid.points {
            let proj = baseline.dot(d);
            let t = fs * proj / c;
            let ta = fs * proj / (c + c_uncertainty);
            let tb = fs * proj / (c - c_uncertainty);
            tdoa.push(t);
            lag.push((t * rate).round() as i32);
            lo.push(((ta.min(tb) - slack) * rate).round() as i32);
            hi.push(((ta.max(tb) + slack) * rate).round() as i32);
        }
        table.tdoa.push(tdoa);
        table.lag.push(lag);
        table.lag_lo.push(lo);
        table.lag_hi.push(hi);
        table.max_tdoa_samples.push(fs * baseline.norm() / c);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_icosphere;

    /// Eight microphones on the corners of a cube, facing horizontally
    /// outward along the diagonals (closed array).
    pub(crate) fn closed_cube() -> Vec<MicSpec> {
        let mut mics = Vec::new();
        for &z in &[-0.05, 0.05] {
            for &(x, y) in &[(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
                mics.push(MicSpec::directional([0.05 * x, 0.05 * y, z], [x, y, 0.0], 180.0));
            }
        }
        mics
    }

    #[test]
    fn closed_cube_keeps_20_of_28() {
        let grid = build_icosphere(4, false);
        let sel = select_pairs(&closed_cube(), &grid).unwrap();
        assert_eq!(sel.pairs.len(), 20);
        // every dropped pair faces in opposite directions
        let mics = closed_cube();
        for i in 0..8 {
            for j in i + 1..8 {
                let kept = sel.pairs.contains(&(i, j));
                let opposite = mics[i].orientation().dot(&mics[j].orientation()) < -1.0 + 1e-12;
                assert_eq!(kept, !opposite, "({i},{j})");
            }
        }
    }

    #[test]
    fn omni_keeps_all_pairs() {
        let grid = build_icosphere(2, false);
        let mics: Vec<MicSpec> = closed_cube()
            .into_iter()
            .map(|m| MicSpec { fov_deg: 360.0, ..m })
            .collect();
        let sel = select_pairs(&mics, &grid).unwrap();
        assert_eq!(sel.pairs.len(), 28);
        assert!(sel.visible.iter().flatten().all(|&v| v));
    }

    #[test]
    fn back_to_back_narrow_mics_cannot_localize() {
        let grid = build_icosphere(3, false);
        let mics = [
            MicSpec::directional([0.05, 0.0, 0.0], [1.0, 0.0, 0.0], 90.0),
            MicSpec::directional([-0.05, 0.0, 0.0], [-1.0, 0.0, 0.0], 90.0),
        ];
        assert_eq!(select_pairs(&mics, &grid), Err(GeometryError::NoPairs));
        assert_eq!(select_pairs(&mics[..1], &grid), Err(GeometryError::TooFewMics(1)));
    }

    #[test]
    fn pruning_is_conservative() {
        // any pair with a grid direction visible to both is retained
        let grid = build_icosphere(3, false);
        let mics = closed_cube();
        let sel = select_pairs(&mics, &grid).unwrap();
        for i in 0..8 {
            for j in i + 1..8 {
                let excited = grid.points.iter().any(|d| mics[i].sees_strictly(d) && mics[j].sees_strictly(d));
                assert_eq!(excited, sel.pairs.contains(&(i, j)));
            }
        }
    }

    fn two_mics() -> Vec<MicSpec> {
        vec![MicSpec::omni([0.17, 0.0, 0.0]), MicSpec::omni([-0.17, 0.0, 0.0])]
    }

    #[test]
    fn on_axis_tdoa() {
        let grid = ScanGrid {
            points: vec![Vec3::x(), -Vec3::x(), Vec3::y(), Vec3::z()],
            level: 0,
            half_sphere: false,
        };
        let mics = two_mics();
        let sel = all_pairs(2, &grid).unwrap();
        // 0.34 m / 340 m/s · 16 kHz = 16 samples
        let t1 = tdoa_table(&mics, &sel, &grid, 16000.0, 340.0, 0.0, 1, 512);
        assert_eq!(t1.lag[0], vec![16, -16, 0, 0]);
        assert!((t1.tdoa[0][0] - 16.0).abs() < 1e-12);
        assert!((t1.max_tdoa_samples[0] - 16.0).abs() < 1e-12);
        let t4 = tdoa_table(&mics, &sel, &grid, 16000.0, 340.0, 0.0, 4, 512);
        assert_eq!(t4.lag[0], vec![64, -64, 0, 0]);
        assert_eq!(t4.corr_len, 2048);
        assert_eq!(t4.lag_lo, t4.lag);
        assert_eq!(t4.lag_hi, t4.lag);
    }

    #[test]
    fn interpolation_scales_before_rounding() {
        let grid = build_icosphere(2, false);
        let mics = closed_cube();
        let sel = all_pairs(8, &grid).unwrap();
        let t1 = tdoa_table(&mics, &sel, &grid, 16000.0, 343.0, 0.0, 1, 512);
        let t4 = tdoa_table(&mics, &sel, &grid, 16000.0, 343.0, 0.0, 4, 512);
        for p in 0..sel.pairs.len() {
            for k in 0..grid.len() {
                assert_eq!(t4.lag[p][k], (t1.tdoa[p][k] * 4.0).round() as i32);
                assert!(t1.tdoa[p][k].abs() <= t1.max_tdoa_samples[p] + 1e-12);
            }
        }
    }

    #[test]
    fn uncertainty_widens_windows() {
        let grid = build_icosphere(2, false);
        let mut mics = two_mics();
        mics[0].sigma_pos_m = 0.002;
        let sel = all_pairs(2, &grid).unwrap();
        let t = tdoa_table(&mics, &sel, &grid, 16000.0, 343.0, 20.0, 4, 512);
        for k in 0..grid.len() {
            assert!(t.lag_lo[0][k] <= t.lag[0][k] && t.lag[0][k] <= t.lag_hi[0][k]);
        }
        let widest = (0..grid.len()).map(|k| t.lag_hi[0][k] - t.lag_lo[0][k]).max().unwrap();
        assert!(widest >= 8, "{widest}");
    }

    #[test]
    fn antisymmetric_and_rotation_invariant() {
        let grid = build_icosphere(2, false);
        let mics = closed_cube();
        let rot = nalgebra::Rotation3::from_euler_angles(0.4, 1.2, -0.7);
        let rotated: Vec<MicSpec> = mics
            .iter()
            .map(|m| {
                let p = rot * m.position();
                MicSpec::omni([p.x, p.y, p.z])
            })
            .collect();
        for i in 0..8 {
            for j in 0..8 {
                for d in &grid.points {
                    let a = tdoa_samples(&mics, i, j, d, 16000.0, 343.0);
                    let b = tdoa_samples(&mics, j, i, d, 16000.0, 343.0);
                    assert_eq!(a, -b);
                    let r = tdoa_samples(&rotated, i, j, &(rot * d), 16000.0, 343.0);
                    assert!((a - r).abs() < 1e-9);
                }
            }
        }
    }
}
