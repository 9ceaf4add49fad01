//! Straightforward reference implementations used to check the optimized
//! stages.

use crate::geometry::PairTable;
use crate::ssl::CrossCorrelations;

/// SRP at every point of `table` by a plain loop over points, pairs and
/// window lags, with explicit circular indexing.
pub fn exhaustive_powers(cc: &CrossCorrelations, table: &PairTable) -> Vec<f64> {
    let len = table.corr_len as i64;
    let n_pairs = table.pairs.len();
    let mut out = vec![0.0; table.n_points];
    for (q, power) in out.iter_mut().enumerate() {
        let mut total = 0.0;
        for p in 0..n_pairs {
            if !table.visible[p][q] {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut lag = table.lag_lo[p][q] as i64;
            while lag <= table.lag_hi[p][q] as i64 {
                let idx = ((lag % len) + len) % len;
                let v = cc.values[p][idx as usize];
                if v > best {
                    best = v;
                }
                lag += 1;
            }
            total += best;
        }
        *power = total / n_pairs as f64;
    }
    out
}

/// Full-grid argmax (lowest index on ties) and its power.
pub fn oracle_exhaustive_scan(cc: &CrossCorrelations, table: &PairTable) -> (usize, f64) {
    let powers = exhaustive_powers(cc, table);
    let mut best = (0, powers[0]);
    for (i, &p) in powers.iter().enumerate().skip(1) {
        if p > best.1 {
            best = (i, p);
        }
    }
    best
}

/// Lag `l` in `-max_lag..=max_lag` maximizing the normalized time-domain
/// cross-correlation `Σ a(t)·b(t + l) / (n − |l|)`.
pub fn xcorr_lag(a: &[f64], b: &[f64], max_lag: i64) -> i64 {
    let n = a.len().min(b.len()) as i64;
    let mut best = (0, f64::NEG_INFINITY);
    for l in -max_lag..=max_lag {
        let mut acc = 0.0;
        for t in 0.max(-l)..n.min(n - l) {
            acc += a[t as usize] * b[(t + l) as usize];
        }
        let v = acc / (n - l.abs()) as f64;
        if v > best.1 {
            best = (l, v);
        }
    }
    best.0
}

/// Textbook constant-velocity Kalman filter on plain arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct TextbookKalman {
    pub x: [f64; 6],
    pub p: [[f64; 6]; 6],
}

type M6 = [[f64; 6]; 6];

fn mul6(a: &M6, b: &M6) -> M6 {
    let mut c = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            for k in 0..6 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn transpose6(a: &M6) -> M6 {
    let mut t = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            t[i][j] = a[j][i];
        }
    }
    t
}

fn inverse3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // cofactor of (j, i)
            let r = [(j + 1) % 3, (j + 2) % 3];
            let c = [(i + 1) % 3, (i + 2) % 3];
            inv[i][j] = (m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]) / det;
        }
    }
    Some(inv)
}

impl TextbookKalman {
    pub fn new(x: [f64; 6], p_diag: [f64; 6]) -> Self {
        let mut p = [[0.0; 6]; 6];
        for i in 0..6 {
            p[i][i] = p_diag[i];
        }
        Self { x, p }
    }

    pub fn predict(&mut self, dt: f64, q_diag: [f64; 6]) {
        let mut f = [[0.0; 6]; 6];
        for i in 0..6 {
            f[i][i] = 1.0;
        }
        for i in 0..3 {
            f[i][i + 3] = dt;
        }
        let mut x = [0.0; 6];
        for i in 0..6 {
            for j in 0..6 {
                x[i] += f[i][j] * self.x[j];
            }
        }
        self.x = x;
        self.p = mul6(&mul6(&f, &self.p), &transpose6(&f));
        for i in 0..6 {
            self.p[i][i] += q_diag[i];
        }
    }

    /// `K = P Hᵀ S⁻¹`, `x += K y`, `P = (I − K H) P`.
    pub fn update(&mut self, z: [f64; 3], r: [[f64; 3]; 3]) -> Option<()> {
        let mut s = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = self.p[i][j] + r[i][j];
            }
        }
        let si = inverse3(&s)?;
        let mut k = [[0.0; 3]; 6];
        for i in 0..6 {
            for j in 0..3 {
                for l in 0..3 {
                    k[i][j] += self.p[i][l] * si[l][j];
                }
            }
        }
        let y = [z[0] - self.x[0], z[1] - self.x[1], z[2] - self.x[2]];
        for i in 0..6 {
            for j in 0..3 {
                self.x[i] += k[i][j] * y[j];
            }
        }
        let mut p = self.p;
        for i in 0..6 {
            for j in 0..6 {
                let mut kh_p = 0.0;
                for l in 0..3 {
                    kh_p += k[i][l] * self.p[l][j];
                }
                p[i][j] -= kh_p;
            }
        }
        self.p = p;
        Some(())
    }
}

/// Largest SIR reported, in dB.
pub const SIR_CAP_DB: f64 = 80.0;

/// Signal-to-interference ratio of `output` for source `target`.
///
/// `contributions[s]` is source `s` as it appears at the output. The output
/// is projected onto the span of the contributions by least squares; the
/// target term's energy is compared with the energy of the other sources'
/// terms. The result is clamped to `±SIR_CAP_DB`.
pub fn measure_sir(output: &[f64], contributions: &[Vec<f64>], target: usize) -> f64 {
    let s = contributions.len();
    let n = output.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut g = nalgebra::DMatrix::<f64>::zeros(s, s);
    let mut rhs = nalgebra::DVector::<f64>::zeros(s);
    for i in 0..s {
        for j in 0..s {
            g[(i, j)] = dot(&contributions[i], &contributions[j]);
        }
        rhs[i] = dot(&contributions[i], output);
    }
    let trace = g.trace().max(1e-300);
    for i in 0..s {
        g[(i, i)] += 1e-12 * trace;
    }
    let coef = g.lu().solve(&rhs).unwrap_or_else(|| nalgebra::DVector::zeros(s));
    let mut target_part = vec![0.0; n];
    let mut interference = vec![0.0; n];
    for (i, c) in contributions.iter().enumerate() {
        let dst = if i == target { &mut target_part } else { &mut interference };
        for (d, v) in dst.iter_mut().zip(c) {
            *d += coef[i] * v;
        }
    }
    let (et, ei) = (dot(&target_part, &target_part), dot(&interference, &interference));
    if ei <= 0.0 {
        return if et > 0.0 { SIR_CAP_DB } else { 0.0 };
    }
    if et <= 0.0 {
        return -SIR_CAP_DB;
    }
    (10.0 * (et / ei).log10()).clamp(-SIR_CAP_DB, SIR_CAP_DB)
}
