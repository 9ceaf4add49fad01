use crate::audio_io::SpectralFrame;
use crate::config::McraConfig;

/// Frequency smoothing applied to the periodogram before minimum tracking.
const FREQ_SMOOTHING: [f64; 3] = [0.25, 0.5, 0.25];

/// Minima-controlled recursive averaging noise tracker, per channel and bin.
#[derive(Debug, Clone)]
pub struct NoiseEstimate {
    params: McraConfig,
    /// Noise power spectrum, `lambda_d[channel][bin]`.
    pub lambda_d: Vec<Vec<f64>>,
    /// Speech-presence probability.
    pub presence: Vec<Vec<f64>>,
    smoothed: Vec<Vec<f64>>,
    s_min: Vec<Vec<f64>>,
    s_tmp: Vec<Vec<f64>>,
    frames_in_window: usize,
    initialized: bool,
}

impl NoiseEstimate {
    pub fn new(params: McraConfig, n_channels: usize, n_bins: usize) -> Self {
        let zeros = vec![vec![0.0; n_bins]; n_channels];
        Self {
            params,
            lambda_d: zeros.clone(),
            presence: zeros.clone(),
            smoothed: zeros.clone(),
            s_min: zeros.clone(),
            s_tmp: zeros,
            frames_in_window: 0,
            initialized: false,
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn update(&mut self, frame: &SpectralFrame) {
        let p = &self.params;
        let window_done = {
            self.frames_in_window += 1;
            self.frames_in_window >= p.l_window
        };
        if window_done {
            self.frames_in_window = 0;
        }
        for (ch, bins) in frame.bins.iter().enumerate() {
            let power: Vec<f64> = bins.iter().map(|b| b.norm_sqr()).collect();
            let n = power.len();
            let sf = |k: usize| -> f64 {
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for (o, w) in FREQ_SMOOTHING.iter().enumerate() {
                    let idx = k as i64 + o as i64 - 1;
                    if idx >= 0 && (idx as usize) < n {
                        acc += w * power[idx as usize];
                        wsum += w;
                    }
                }
                acc / wsum
            };
            if !self.initialized {
                for k in 0..n {
                    let s = sf(k);
                    self.smoothed[ch][k] = s;
                    self.s_min[ch][k] = s;
                    self.s_tmp[ch][k] = s;
                    self.lambda_d[ch][k] = power[k];
                }
                continue;
            }
            for k in 0..n {
                let s = p.alpha_s * self.smoothed[ch][k] + (1.0 - p.alpha_s) * sf(k);
                self.smoothed[ch][k] = s;
                self.s_min[ch][k] = self.s_min[ch][k].min(s);
                self.s_tmp[ch][k] = self.s_tmp[ch][k].min(s);
                if window_done {
                    self.s_min[ch][k] = self.s_tmp[ch][k].min(s);
                    self.s_tmp[ch][k] = s;
                }
                let s_min = self.s_min[ch][k];
                let present = if s_min > 0.0 { s > p.delta * s_min } else { s > 0.0 };
                let prob = p.alpha_p * self.presence[ch][k] + (1.0 - p.alpha_p) * present as u8 as f64;
                self.presence[ch][k] = prob;
                let alpha = p.alpha_d + (1.0 - p.alpha_d) * prob;
                self.lambda_d[ch][k] = alpha * self.lambda_d[ch][k] + (1.0 - alpha) * power[k];
            }
        }
        self.initialized = true;
    }

    /// Wiener-style SNR weight `ξ/(1+ξ)` with `ξ = max(|X|²/λ − 1, 0)`.
    #[inline]
    pub fn snr_weight(&self, channel: usize, bin: usize, power: f64) -> f64 {
        let lambda = self.lambda_d[channel][bin];
        if lambda <= 0.0 {
            return if power > 0.0 { 1.0 } else { 0.0 };
        }
        let xi = (power / lambda - 1.0).max(0.0);
        xi / (1.0 + xi)
    }
}

/// Functional form of [`NoiseEstimate::update`].
pub fn mcra_update(mut state: NoiseEstimate, frame: &SpectralFrame) -> NoiseEstimate {
    state.update(frame);
    state
}
