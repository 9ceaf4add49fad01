use std::f64::consts::PI;

use crate::config::MicSpec;
use crate::{Complex64, Vec3};

/// Microphones facing `direction` (closed field-of-view test; omni mics
/// always qualify). Returns the full array and `true` when none qualify.
pub fn select_subarray(mics: &[MicSpec], direction: &Vec3) -> (Vec<usize>, bool) {
    let sub: Vec<usize> = (0..mics.len()).filter(|&m| mics[m].sees(direction)).collect();
    if sub.is_empty() {
        ((0..mics.len()).collect(), true)
    } else {
        (sub, false)
    }
}

/// Beamforming target with per-mic fractional delays relative to a
/// reference microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringTarget {
    pub track_id: u64,
    pub direction: Vec3,
    pub subarray: Vec<usize>,
    pub reference: usize,
    /// `delays[i]` belongs to `subarray[i]`: `fs (p_ref − p_m)·d / c`.
    pub delays: Vec<f64>,
    /// The subarray selection came up empty and the full array is used.
    pub fallback: bool,
}

impl SteeringTarget {
    pub fn new(track_id: u64, direction: Vec3, mics: &[MicSpec], use_subarray: bool, fs: f64, c: f64) -> Self {
        let direction = direction.normalize();
        let (subarray, fallback) = if use_subarray {
            select_subarray(mics, &direction)
        } else {
            ((0..mics.len()).collect(), false)
        };
        Self::with_subarray(track_id, direction, mics, subarray, fallback, fs, c)
    }

    pub fn with_subarray(
        track_id: u64,
        direction: Vec3,
        mics: &[MicSpec],
        subarray: Vec<usize>,
        fallback: bool,
        fs: f64,
        c: f64,
    ) -> Self {
        assert!(!subarray.is_empty(), "empty subarray");
        let centroid = mics.iter().map(MicSpec::position).sum::<Vec3>() / mics.len() as f64;
        let reference = *subarray
            .iter()
            .min_by(|&&a, &&b| {
                (mics[a].position() - centroid)
                    .norm()
                    .total_cmp(&(mics[b].position() - centroid).norm())
            })
            .expect("non-empty");
        let p_ref = mics[reference].position();
        let delays = subarray
            .iter()
            .map(|&m| fs * (p_ref - mics[m].position()).dot(&direction) / c)
            .collect();
        Self {
            track_id,
            direction,
            subarray,
            reference,
            delays,
            fallback,
        }
    }

    /// Steering vector over all `n_mics` at bin `k`: the transfer from the
    /// reference-mic signal to each subarray mic, zero elsewhere.
    pub fn steering(&self, n_mics: usize, k: usize, frame_size: usize) -> Vec<Complex64> {
        let mut a = vec![Complex64::new(0.0, 0.0); n_mics];
        for (&m, &tau) in self.subarray.iter().zip(&self.delays) {
            a[m] = Complex64::from_polar(1.0, -2.0 * PI * k as f64 * tau / frame_size as f64);
        }
        a
    }

    /// Delay-and-sum weights at bin `k` (output = Σ w_m X_m).
    pub fn das_weights(&self, n_mics: usize, k: usize, frame_size: usize) -> Vec<Complex64> {
        let scale = 1.0 / self.subarray.len() as f64;
        self.steering(n_mics, k, frame_size)
            .into_iter()
            .map(|a| a.conj() * scale)
            .collect()
    }
}
