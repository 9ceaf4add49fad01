use std::f64::consts::PI;

use crate::config::GmmConfig;

/// One-dimensional Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl From<&GmmConfig> for Gmm {
    fn from(c: &GmmConfig) -> Self {
        Self {
            weights: c.weights.clone(),
            means: c.means.clone(),
            variances: c.variances.clone(),
        }
    }
}

impl From<&Gmm> for GmmConfig {
    fn from(g: &Gmm) -> Self {
        Self {
            weights: g.weights.clone(),
            means: g.means.clone(),
            variances: g.variances.clone(),
        }
    }
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

impl Gmm {
    pub fn pdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, m), v)| w * normal_pdf(x, *m, *v))
            .sum()
    }

    /// Maximum-likelihood fit by EM, initialized from sample quantiles.
    /// Variances are floored at `1e-6` times the sample variance.
    pub fn fit(samples: &[f64], k: usize, iterations: usize) -> Option<Self> {
        if samples.len() < k || k == 0 {
            return None;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        if var <= 0.0 {
            return None;
        }
        let floor = var * 1e-6;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut g = Gmm {
            weights: vec![1.0 / k as f64; k],
            means: (0..k)
                .map(|c| sorted[((2 * c + 1) * sorted.len()) / (2 * k)])
                .collect(),
            variances: vec![var / k as f64; k],
        };
        let mut resp = vec![0.0; k];
        for _ in 0..iterations {
            let mut nk = vec![0.0; k];
            let mut sx = vec![0.0; k];
            let mut sxx = vec![0.0; k];
            for &x in samples {
                let mut total = 0.0;
                for c in 0..k {
                    resp[c] = g.weights[c] * normal_pdf(x, g.means[c], g.variances[c]);
                    total += resp[c];
                }
                if total <= 0.0 {
                    // far outlier: give it to the nearest component
                    let c = (0..k)
                        .min_by(|&a, &b| (x - g.means[a]).abs().total_cmp(&(x - g.means[b]).abs()))
                        .unwrap_or(0);
                    resp.iter_mut().for_each(|r| *r = 0.0);
                    resp[c] = 1.0;
                    total = 1.0;
                }
                for c in 0..k {
                    let r = resp[c] / total;
                    nk[c] += r;
                    sx[c] += r * x;
                    sxx[c] += r * x * x;
                }
            }
            for c in 0..k {
                if nk[c] < 1e-9 {
                    continue;
                }
                let m = sx[c] / nk[c];
                g.weights[c] = nk[c] / n;
                g.means[c] = m;
                g.variances[c] = (sxx[c] / nk[c] - m * m).max(floor);
            }
            let s: f64 = g.weights.iter().sum();
            g.weights.iter_mut().for_each(|w| *w /= s);
        }
        Some(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn pdf_integrates_to_one() {
        let g = Gmm {
            weights: vec![0.3, 0.7],
            means: vec![0.2, 0.6],
            variances: vec![0.01, 0.04],
        };
        let dx = 1e-4;
        let total: f64 = (-20000..30000).map(|i| g.pdf(i as f64 * dx) * dx).sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn fit_recovers_two_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Normal::new(0.1, 0.02).unwrap();
        let b = Normal::new(0.5, 0.05).unwrap();
        let mut xs: Vec<f64> = (0..3000).map(|_| a.sample(&mut rng)).collect();
        xs.extend((0..7000).map(|_| b.sample(&mut rng)));
        let g = Gmm::fit(&xs, 2, 200).unwrap();
        assert!((g.weights[0] - 0.3).abs() < 0.02);
        assert!((g.means[0] - 0.1).abs() < 0.005);
        assert!((g.means[1] - 0.5).abs() < 0.005);
        assert!((g.variances[1].sqrt() - 0.05).abs() < 0.005);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(Gmm::fit(&[1.0; 10], 2, 10).is_none());
        assert!(Gmm::fit(&[1.0], 2, 10).is_none());
    }
}
