use std::f64::consts::PI;

use super::SteeringTarget;
use crate::audio_io::SpectralFrame;
use crate::Complex64;

/// Phase-aligned average over the target's subarray, as a one-channel frame.
pub fn delay_and_sum(frame: &SpectralFrame, target: &SteeringTarget) -> SpectralFrame {
    let n = frame.frame_size as f64;
    let scale = 1.0 / target.subarray.len() as f64;
    let bins = (0..frame.n_bins())
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&m, &tau) in target.subarray.iter().zip(&target.delays) {
                acc += frame.bins[m][k] * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * tau / n);
            }
            acc * scale
        })
        .collect();
    SpectralFrame {
        frame_index: frame.frame_index,
        fs_hz: frame.fs_hz,
        frame_size: frame.frame_size,
        bins: vec![bins],
    }
}

/// Applies per-bin weights `w[k][m]` (and optional gains) to a frame.
pub fn apply_weights(frame: &SpectralFrame, weights: &[Vec<Complex64>], gains: Option<&[f64]>) -> Vec<Complex64> {
    (0..frame.n_bins())
        .map(|k| {
            let y: Complex64 = weights[k].iter().zip(&frame.bins).map(|(w, x)| w * x[k]).sum();
            y * gains.map_or(1.0, |g| g[k])
        })
        .collect()
}
