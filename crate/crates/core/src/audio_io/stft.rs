//! Short-time Fourier transform with weighted overlap-add synthesis.
//!
//! Analysis and synthesis both use the same window. Synthesis divides the
//! overlap-added output by the accumulated squared window, which gives
//! perfect reconstruction wherever that sum is non-zero (everywhere except
//! the first sample of a periodic Hann stream).

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::{AudioError, AudioFrame, SpectralFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5·cos(2πn/N)`.
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

/// Streaming analysis. Frame `k` covers input samples
/// `[k·hop, k·hop + frame_size)`.
pub struct Stft {
    frame_size: usize,
    hop: usize,
    window: Vec<f64>,
    fft: Arc<dyn RealToComplex<f64>>,
    pending: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    next_index: u64,
}

impl Stft {
    pub fn new(frame_size: usize, hop: usize, window: Window, n_channels: usize) -> Self {
        assert!(hop > 0 && hop <= frame_size, "hop must be in 1..=frame_size");
        Self {
            frame_size,
            hop,
            window: window.coefficients(frame_size),
            fft: RealFftPlanner::<f64>::new().plan_fft_forward(frame_size),
            pending: vec![Vec::with_capacity(2 * frame_size); n_channels],
            scratch: vec![0.0; frame_size],
            next_index: 0,
        }
    }

    pub fn push(&mut self, frame: &AudioFrame) -> Vec<SpectralFrame> {
        for (p, s) in self.pending.iter_mut().zip(&frame.samples) {
            p.extend_from_slice(s);
        }
        let mut out = Vec::new();
        while self.pending.first().is_some_and(|p| p.len() >= self.frame_size) {
            let mut bins = Vec::with_capacity(self.pending.len());
            for p in &mut self.pending {
                for (d, (x, w)) in self.scratch.iter_mut().zip(p.iter().zip(&self.window)) {
                    *d = x * w;
                }
                let mut spec = self.fft.make_output_vec();
                self.fft
                    .process(&mut self.scratch, &mut spec)
                    .expect("buffer sizes match the plan");
                spec[0].im = 0.0;
                let last = spec.len() - 1;
                spec[last].im = 0.0;
                bins.push(spec);
                p.drain(..self.hop);
            }
            out.push(SpectralFrame {
                frame_index: self.next_index,
                fs_hz: frame.fs_hz,
                frame_size: self.frame_size,
                bins,
            });
            self.next_index += 1;
        }
        out
    }
}

/// Streaming synthesis: each pushed frame releases `hop` finished samples;
/// [`Istft::finish`] releases the remaining `frame_size - hop`.
pub struct Istft {
    frame_size: usize,
    hop: usize,
    window: Vec<f64>,
    ifft: Arc<dyn ComplexToReal<f64>>,
    acc: Vec<Vec<f64>>,
    wacc: Vec<f64>,
    expected: Option<u64>,
    fs_hz: u32,
    out_index: u64,
}

impl Istft {
    pub fn new(frame_size: usize, hop: usize, window: Window, n_channels: usize) -> Self {
        assert!(hop > 0 && hop <= frame_size, "hop must be in 1..=frame_size");
        Self {
            frame_size,
            hop,
            window: window.coefficients(frame_size),
            ifft: RealFftPlanner::<f64>::new().plan_fft_inverse(frame_size),
            acc: vec![vec![0.0; frame_size]; n_channels],
            wacc: vec![0.0; frame_size],
            expected: None,
            fs_hz: 0,
            out_index: 0,
        }
    }

    pub fn push(&mut self, frame: &SpectralFrame) -> Result<AudioFrame, AudioError> {
        if let Some(expected) = self.expected {
            if frame.frame_index != expected {
                return Err(AudioError::FrameGap {
                    expected,
                    got: frame.frame_index,
                });
            }
        }
        self.expected = Some(frame.frame_index + 1);
        self.fs_hz = frame.fs_hz;
        let n = self.frame_size;
        let mut time = self.ifft.make_output_vec();
        for (acc, bins) in self.acc.iter_mut().zip(&frame.bins) {
            let mut spec = bins.clone();
            spec[0].im = 0.0;
            let last = spec.len() - 1;
            spec[last].im = 0.0;
            self.ifft
                .process(&mut spec, &mut time)
                .expect("buffer sizes match the plan");
            for ((a, t), w) in acc.iter_mut().zip(&time).zip(&self.window) {
                *a += t / n as f64 * w;
            }
        }
        for (wa, w) in self.wacc.iter_mut().zip(&self.window) {
            *wa += w * w;
        }
        Ok(self.release(self.hop))
    }

    /// Flush the tail of the last frame.
    pub fn finish(&mut self) -> AudioFrame {
        self.release(self.frame_size - self.hop)
    }

    fn release(&mut self, count: usize) -> AudioFrame {
        let samples = self
            .acc
            .iter_mut()
            .map(|acc| {
                let out: Vec<f64> = acc[..count]
                    .iter()
                    .zip(&self.wacc)
                    .map(|(a, w)| if *w > 1e-10 { a / w } else { 0.0 })
                    .collect();
                acc.drain(..count);
                acc.resize(self.frame_size, 0.0);
                out
            })
            .collect();
        self.wacc.drain(..count);
        self.wacc.resize(self.frame_size, 0.0);
        let frame = AudioFrame {
            frame_index: self.out_index,
            fs_hz: self.fs_hz,
            samples,
        };
        self.out_index += 1;
        frame
    }
}

/// Analyze a whole stream of frames with a periodic Hann window.
pub fn stft(frames: &[AudioFrame], frame_size: usize, hop: usize) -> Vec<SpectralFrame> {
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let mut s = Stft::new(frame_size, hop, Window::Hann, first.n_channels());
    frames.iter().flat_map(|f| s.push(f)).collect()
}

/// Analyze whole per-channel signals.
pub fn stft_signal(channels: &[Vec<f64>], fs_hz: u32, frame_size: usize, hop: usize, window: Window) -> Vec<SpectralFrame> {
    let mut s = Stft::new(frame_size, hop, window, channels.len());
    s.push(&AudioFrame {
        frame_index: 0,
        fs_hz,
        samples: channels.to_vec(),
    })
}

/// Synthesize a contiguous run of spectral frames (periodic Hann). The output
/// spans `(n - 1)·hop + frame_size` samples.
pub fn istft(frames: &[SpectralFrame], frame_size: usize, hop: usize) -> Result<Vec<AudioFrame>, AudioError> {
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let mut s = Istft::new(frame_size, hop, Window::Hann, first.n_channels());
    let mut out = frames.iter().map(|f| s.push(f)).collect::<Result<Vec<_>, _>>()?;
    out.push(s.finish());
    Ok(out)
}

/// Concatenate frames into per-channel signals.
pub fn concat_frames(frames: &[AudioFrame]) -> Vec<Vec<f64>> {
    let n_ch = frames.first().map_or(0, AudioFrame::n_channels);
    (0..n_ch)
        .map(|c| frames.iter().flat_map(|f| f.samples[c].iter().copied()).collect())
        .collect()
}
