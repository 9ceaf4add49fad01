//! Synthetic scenes and reference implementations for verification.
//!
//! [`Scene::render`] produces free-field, far-field microphone signals with
//! per-source contributions kept separate, so separation quality can be
//! measured exactly. The oracles in this module are deliberately plain
//! re-implementations of the optimized stages.

mod arrays;
mod fit;
mod oracles;
mod scene;

pub use arrays::{circular, closed_cube, named_array, open_cube, ARRAY_NAMES};
pub use fit::{collect_powers, fit_power_models, PowerSamples};
pub use oracles::{
    exhaustive_powers, measure_sir, oracle_exhaustive_scan, xcorr_lag, TextbookKalman, SIR_CAP_DB,
};
pub use scene::{
    source_signal, ArraySpec, Directivity, FrameTruth, Rendering, Scene, SceneError, SignalSpec, SourceSpec,
    SourceTruth, Trajectory,
};

use crate::audio_io::{stft_signal, Window};
use crate::SpectralFrame;

/// Hann-windowed spectra of `[mic][sample]` signals.
pub fn spectra(signals: &[Vec<f64>], fs_hz: u32, frame_size: usize, hop: usize) -> Vec<SpectralFrame> {
    stft_signal(signals, fs_hz, frame_size, hop, Window::Hann)
}

/// Real vector `[re, im, re, im, ...]` of a sequence of spectra, so that
/// [`measure_sir`] can operate on spectral outputs.
pub fn flatten_spectra<'a>(spectra: impl IntoIterator<Item = &'a [crate::Complex64]>) -> Vec<f64> {
    spectra
        .into_iter()
        .flat_map(|s| s.iter().flat_map(|c| [c.re, c.im]))
        .collect()
}
