use std::collections::BTreeMap;

use crate::config::PostfilterConfig;
use crate::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(x)` for `x > 0`.
pub fn expint_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs a positive argument");
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for n in 1..200 {
            term *= -x / n as f64;
            let add = -term / n as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // modified Lentz evaluation of the continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Log-MMSE spectral gain from a-priori SNR `xi` and a-posteriori SNR `gamma`.
pub fn log_mmse_gain(xi: f64, gamma: f64) -> f64 {
    let v = xi * gamma / (1.0 + xi);
    if v < 1e-12 {
        return 0.0;
    }
    xi / (1.0 + xi) * (0.5 * expint_e1(v)).exp()
}

#[derive(Debug, Clone)]
struct TargetState {
    /// Previous `G²γ`, the decision-directed estimate.
    prev: Vec<f64>,
    leak: Vec<f64>,
}

/// Single-channel post-filter whose interference estimate combines the
/// stationary noise at the output and leakage from competing outputs.
#[derive(Debug, Clone)]
pub struct Postfilter {
    cfg: PostfilterConfig,
    g_min: f64,
    states: BTreeMap<u64, TargetState>,
}

impl Postfilter {
    pub fn new(cfg: &PostfilterConfig) -> Self {
        Self {
            g_min: 10f64.powf(cfg.g_min_db / 20.0),
            cfg: cfg.clone(),
            states: BTreeMap::new(),
        }
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    /// Gains per output, each `[bin]` in `[G_min, 1]`. `weights[i][k][m]`
    /// maps the per-mic noise PSD `noise_psd[m][k]` to output `i`.
    pub fn gains(
        &mut self,
        ids: &[u64],
        outputs: &[Vec<Complex64>],
        weights: &[Vec<Vec<Complex64>>],
        noise_psd: Option<&[Vec<f64>]>,
    ) -> Vec<Vec<f64>> {
        self.states.retain(|id, _| ids.contains(id));
        let n_bins = outputs.first().map_or(0, Vec::len);
        let power: Vec<Vec<f64>> = outputs.iter().map(|o| o.iter().map(|y| y.norm_sqr()).collect()).collect();
        let mut all = Vec::with_capacity(outputs.len());
        for (i, &id) in ids.iter().enumerate() {
            let st = self.states.entry(id).or_insert_with(|| TargetState {
                prev: vec![0.0; n_bins],
                leak: vec![0.0; n_bins],
            });
            let mut g = vec![1.0; n_bins];
            for k in 0..n_bins {
                let competing: f64 = (0..outputs.len()).filter(|&j| j != i).map(|j| power[j][k]).sum();
                let a = self.cfg.alpha_leak;
                st.leak[k] = a * st.leak[k] + (1.0 - a) * self.cfg.eta * competing;
                let stationary = noise_psd.map_or(0.0, |psd| {
                    weights[i][k]
                        .iter()
                        .enumerate()
                        .map(|(m, w)| w.norm_sqr() * psd[m][k])
                        .sum()
                });
                let interference = stationary + st.leak[k];
                if interference <= 1e-20 {
                    st.prev[k] = power[i][k] / 1e-20;
                    continue;
                }
                let gamma = power[i][k] / interference;
                let xi = self.cfg.alpha_dd * st.prev[k] + (1.0 - self.cfg.alpha_dd) * (gamma - 1.0).max(0.0);
                let gain = log_mmse_gain(xi, gamma).clamp(self.g_min, 1.0);
                st.prev[k] = gain * gain * gamma;
                g[k] = gain;
            }
            all.push(g);
        }
        all
    }
}
