use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner};

use super::NoiseEstimate;
use crate::audio_io::SpectralFrame;
use crate::geometry::PairTable;
use crate::Complex64;

/// Circular cross-correlations, one per pair. `values[p][l]` is the
/// correlation at lag `l` (negative lags wrap to the end), in interpolated
/// samples; the peak sits at the delay of mic `j` relative to mic `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrelations {
    pub frame_index: u64,
    pub interpolation_rate: usize,
    pub values: Vec<Vec<f64>>,
}

impl CrossCorrelations {
    pub fn corr_len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Value at a signed lag.
    pub fn at(&self, pair: usize, lag: i32) -> f64 {
        let n = self.corr_len() as i32;
        self.values[pair][lag.rem_euclid(n) as usize]
    }

    /// Signed lag of the maximum for one pair.
    pub fn peak_lag(&self, pair: usize) -> i32 {
        let v = &self.values[pair];
        let n = v.len();
        let (i, _) = v
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
        if i >= n / 2 {
            i as i32 - n as i32
        } else {
            i as i32
        }
    }
}

/// GCC-PHAT with frequency-domain zero padding for interpolation.
pub struct GccPhat {
    frame_size: usize,
    rate: usize,
    ifft: Arc<dyn ComplexToReal<f64>>,
    spectrum: Vec<Complex64>,
    weights: Vec<Vec<f64>>,
}

impl GccPhat {
    pub fn new(frame_size: usize, interpolation_rate: usize) -> Self {
        let len = frame_size * interpolation_rate;
        let ifft = RealFftPlanner::<f64>::new().plan_fft_inverse(len);
        Self {
            frame_size,
            rate: interpolation_rate,
            spectrum: ifft.make_input_vec(),
            ifft,
            weights: Vec::new(),
        }
    }

    /// PHAT denominator floor.
    pub fn epsilon(&self) -> f64 {
        1e-12 * self.frame_size as f64
    }

    /// `noise` enables the per-bin SNR weights; `None` is plain PHAT.
    pub fn compute(
        &mut self,
        frame: &SpectralFrame,
        noise: Option<&NoiseEstimate>,
        pairs: &[(usize, usize)],
    ) -> CrossCorrelations {
        assert_eq!(frame.frame_size, self.frame_size, "frame size mismatch");
        let half = self.frame_size / 2;
        let eps = self.epsilon();

        self.weights = frame
            .bins
            .iter()
            .enumerate()
            .map(|(ch, bins)| match noise {
                Some(n) => bins.iter().enumerate().map(|(k, b)| n.snr_weight(ch, k, b.norm_sqr())).collect(),
                None => vec![1.0; bins.len()],
            })
            .collect();

        let mut values = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            let (xi, xj) = (&frame.bins[i], &frame.bins[j]);
            let (wi, wj) = (&self.weights[i], &self.weights[j]);
            self.spectrum.iter_mut().for_each(|s| *s = Complex64::new(0.0, 0.0));
            for k in 0..=half {
                let cross = xi[k].conj() * xj[k];
                let denom = xi[k].norm() * xj[k].norm() + eps;
                let mut z = cross * (wi[k] * wj[k] / denom);
                if k == half && self.rate > 1 {
                    // the zero-padded spectrum mirrors the old Nyquist bin
                    z *= 0.5;
                }
                self.spectrum[k] = z;
            }
            self.spectrum[0].im = 0.0;
            if self.rate == 1 {
                self.spectrum[half].im = 0.0;
            }
            let mut out = self.ifft.make_output_vec();
            self.ifft
                .process(&mut self.spectrum, &mut out)
                .expect("buffer sizes match the plan");
            let scale = 1.0 / self.frame_size as f64;
            out.iter_mut().for_each(|v| *v *= scale);
            values.push(out);
        }
        CrossCorrelations {
            frame_index: frame.frame_index,
            interpolation_rate: self.rate,
            values,
        }
    }
}

/// One-shot GCC-PHAT over the pairs of `table`.
pub fn gcc_phat(frame: &SpectralFrame, noise: Option<&NoiseEstimate>, table: &PairTable) -> CrossCorrelations {
    GccPhat::new(frame.frame_size, table.interpolation_rate).compute(frame, noise, &table.pairs)
}
