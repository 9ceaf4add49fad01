//! RAW PCM ingestion and output, resampling, and the STFT/ISTFT pair.

mod pcm;
mod resample;
mod stft;

use thiserror::Error;

use crate::Complex64;

pub use pcm::{decode_raw, decode_sample, encode_raw, encode_sample, RawDecoder};
pub use resample::{resample, Reframer, Resampler};
pub use stft::{concat_frames, istft, stft, stft_signal, Istft, Stft, Window};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported bit depth {0} (expected 8, 16, 24 or 32)")]
    UnsupportedBitDepth(u32),
    #[error("mapping selects channel {channel} but the stream has {n_channels} channels")]
    BadMapping { channel: usize, n_channels: usize },
    #[error("read failed after {frames} frames: {source}")]
    Io {
        frames: u64,
        #[source]
        source: std::io::Error,
    },
    #[error("frame index gap: expected {expected}, got {got}")]
    FrameGap { expected: u64, got: u64 },
}

/// A block of time-domain samples, `samples[channel][n]`, normalized to
/// [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrame {
    pub frame_index: u64,
    pub fs_hz: u32,
    pub samples: Vec<Vec<f64>>,
}

impl AudioFrame {
    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One STFT frame, `bins[channel][k]` for `k` in `0..=frame_size/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub frame_index: u64,
    pub fs_hz: u32,
    pub frame_size: usize,
    pub bins: Vec<Vec<Complex64>>,
}

impl SpectralFrame {
    pub fn zeros(n_channels: usize, frame_size: usize, fs_hz: u32, frame_index: u64) -> Self {
        Self {
            frame_index,
            fs_hz,
            frame_size,
            bins: vec![vec![Complex64::new(0.0, 0.0); frame_size / 2 + 1]; n_channels],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.bins.len()
    }

    pub fn n_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }
}

pub fn bytes_per_sample(bits: u32) -> Result<usize, AudioError> {
    match bits {
        8 | 16 | 24 | 32 => Ok(bits as usize / 8),
        other => Err(AudioError::UnsupportedBitDepth(other)),
    }
}
