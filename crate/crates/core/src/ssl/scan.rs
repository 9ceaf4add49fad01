use super::{CrossCorrelations, PotentialDoa};
use crate::geometry::{PairTable, ScanTables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanMode {
    /// Coarse grid first, then the fine neighborhood of the coarse winner.
    #[default]
    Hierarchical,
    /// Every fine grid point.
    Exhaustive,
}

/// Operation counts accumulated across scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScanCounters {
    /// Pairwise cross-correlations computed.
    pub pairs_computed: u64,
    pub coarse_points: u64,
    pub fine_points: u64,
    /// Peak searches (one per emitted potential DOA).
    pub scans: u64,
}

impl ScanCounters {
    pub fn add(&mut self, other: &ScanCounters) {
        self.pairs_computed += other.pairs_computed;
        self.coarse_points += other.coarse_points;
        self.fine_points += other.fine_points;
        self.scans += other.scans;
    }
}

/// Steered response at one grid point: for each visible pair, the maximum
/// correlation over the point's lag window, summed and divided by the
/// number of pairs in the table.
pub fn srp_power(cc: &CrossCorrelations, table: &PairTable, point: usize) -> f64 {
    let mut sum = 0.0;
    for p in 0..table.n_pairs() {
        if !table.visible[p][point] {
            continue;
        }
        let v = &cc.values[p];
        let best = (table.lag_lo[p][point]..=table.lag_hi[p][point])
            .map(|l| v[table.wrap(l)])
            .fold(f64::NEG_INFINITY, f64::max);
        sum += best;
    }
    sum / table.n_pairs().max(1) as f64
}

fn argmax(cc: &CrossCorrelations, table: &PairTable, points: impl Iterator<Item = usize>) -> (usize, f64, u64) {
    let mut best = (0, f64::NEG_INFINITY);
    let mut count = 0;
    for i in points {
        count += 1;
        let e = srp_power(cc, table, i);
        if e > best.1 || (e == best.1 && i < best.0) {
            best = (i, e);
        }
    }
    (best.0, best.1, count)
}

/// Extracts up to `n_potential` peaks, zeroing the winning lags (±1) of each
/// pair before the next search. `cc` is consumed in the process.
pub fn srp_scan(
    cc: &mut CrossCorrelations,
    tables: &ScanTables,
    n_potential: usize,
    mode: ScanMode,
    counters: &mut ScanCounters,
) -> Vec<PotentialDoa> {
    let fine = &tables.fine_table;
    let mut out = Vec::with_capacity(n_potential);
    for rank in 1..=n_potential {
        let (point, power) = match mode {
            ScanMode::Exhaustive => {
                let (i, e, n) = argmax(cc, fine, 0..tables.fine.len());
                counters.fine_points += n;
                (i, e)
            }
            ScanMode::Hierarchical => {
                let (c, _, n) = argmax(cc, &tables.coarse_table, 0..tables.coarse.len());
                counters.coarse_points += n;
                let (i, e, n) = argmax(cc, fine, tables.neighbors[c].iter().copied());
                counters.fine_points += n;
                (i, e)
            }
        };
        counters.scans += 1;
        out.push(PotentialDoa {
            direction: tables.fine.points[point],
            power: power.max(0.0),
            frame_index: cc.frame_index,
            rank,
            grid_index: point,
        });
        for p in 0..fine.n_pairs() {
            if !fine.visible[p][point] {
                continue;
            }
            let lag = fine.lag[p][point];
            for l in lag - 1..=lag + 1 {
                let k = fine.wrap(l);
                cc.values[p][k] = 0.0;
            }
        }
    }
    // zeroing may lift a later peak above an earlier clamped one
    for i in 1..out.len() {
        if out[i].power > out[i - 1].power {
            out[i].power = out[i - 1].power;
        }
    }
    out
}
