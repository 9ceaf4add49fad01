//! Windowed-sinc polyphase resampler (64 taps per phase, Kaiser β = 8).

use super::AudioFrame;

const TAPS_PER_PHASE: usize = 64;
const KAISER_BETA: f64 = 8.0;
/// Cutoff as a fraction of the lower Nyquist frequency.
const CUTOFF_FRACTION: f64 = 0.92;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Streaming rational resampler. Each channel keeps a short history, so
/// blocks may have any length.
pub struct Resampler {
    up: usize,
    down: usize,
    /// `bank[phase][tap]`
    bank: Vec<Vec<f64>>,
    history: Vec<Vec<f64>>,
    /// absolute index of `history[_][0]`
    history_start: u64,
    consumed: u64,
    next_out: u64,
    passthrough: bool,
}

impl Resampler {
    pub fn new(fs_in: u32, fs_out: u32, n_channels: usize) -> Self {
        assert!(fs_in > 0 && fs_out > 0, "sample rates must be positive");
        let g = gcd(fs_in as u64, fs_out as u64);
        let up = (fs_out as u64 / g) as usize;
        let down = (fs_in as u64 / g) as usize;
        let passthrough = up == down;

        let bank = if passthrough {
            Vec::new()
        } else {
            let len = TAPS_PER_PHASE * up;
            let center = (len - 1) as f64 / 2.0;
            // cycles per upsampled sample
            let nu = 0.5 / up.max(down) as f64 * CUTOFF_FRACTION;
            let i0b = bessel_i0(KAISER_BETA);
            let proto: Vec<f64> = (0..len)
                .map(|k| {
                    let t = k as f64 - center;
                    let x = 2.0 * nu * t;
                    let sinc = if x.abs() < 1e-12 {
                        1.0
                    } else {
                        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
                    };
                    let r = 2.0 * k as f64 / (len - 1) as f64 - 1.0;
                    let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0b;
                    sinc * w
                })
                .collect();
            (0..up)
                .map(|p| {
                    let mut taps: Vec<f64> = (0..TAPS_PER_PHASE).map(|j| proto[p + j * up]).collect();
                    let s: f64 = taps.iter().sum();
                    taps.iter_mut().for_each(|t| *t /= s);
                    taps
                })
                .collect()
        };

        Self {
            up,
            down,
            bank,
            history: vec![Vec::new(); n_channels],
            history_start: 0,
            consumed: 0,
            next_out: 0,
            passthrough,
        }
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    /// Feed one block per channel, returning the output samples that became
    /// available.
    pub fn process(&mut self, input: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if self.passthrough {
            return input.to_vec();
        }
        let block = input.first().map_or(0, Vec::len);
        for (h, x) in self.history.iter_mut().zip(input) {
            h.extend_from_slice(x);
        }
        self.consumed += block as u64;

        let mut out = vec![Vec::new(); self.history.len()];
        loop {
            let pos = self.next_out * self.down as u64;
            let base = pos / self.up as u64;
            if base >= self.consumed {
                break;
            }
            let phase = (pos % self.up as u64) as usize;
            let taps = &self.bank[phase];
            for (h, o) in self.history.iter().zip(out.iter_mut()) {
                let mut acc = 0.0;
                for (j, t) in taps.iter().enumerate() {
                    let idx = base as i64 - j as i64;
                    if idx >= self.history_start as i64 {
                        acc += t * h[(idx - self.history_start as i64) as usize];
                    }
                }
                o.push(acc);
            }
            self.next_out += 1;
        }

        // keep only what the next output can still reach
        let next_base = self.next_out * self.down as u64 / self.up as u64;
        let keep_from = next_base.saturating_sub(TAPS_PER_PHASE as u64).max(self.history_start);
        let drop = (keep_from - self.history_start) as usize;
        if drop > 0 {
            for h in &mut self.history {
                h.drain(..drop);
            }
            self.history_start = keep_from;
        }
        out
    }
}

/// Collects per-channel samples and cuts them into fixed-size frames.
pub struct Reframer {
    hop: usize,
    fs_hz: u32,
    pending: Vec<Vec<f64>>,
    next_index: u64,
}

impl Reframer {
    pub fn new(n_channels: usize, hop: usize, fs_hz: u32) -> Self {
        Self {
            hop,
            fs_hz,
            pending: vec![Vec::new(); n_channels],
            next_index: 0,
        }
    }

    pub fn push(&mut self, samples: &[Vec<f64>]) -> Vec<AudioFrame> {
        for (p, s) in self.pending.iter_mut().zip(samples) {
            p.extend_from_slice(s);
        }
        let mut frames = Vec::new();
        while self.pending.first().is_some_and(|p| p.len() >= self.hop) {
            let samples = self.pending.iter_mut().map(|p| p.drain(..self.hop).collect()).collect();
            frames.push(AudioFrame {
                frame_index: self.next_index,
                fs_hz: self.fs_hz,
                samples,
            });
            self.next_index += 1;
        }
        frames
    }

    /// Emit the remaining samples as a short final frame, if any.
    pub fn flush(&mut self) -> Option<AudioFrame> {
        if self.pending.first().is_none_or(Vec::is_empty) {
            return None;
        }
        let samples = self.pending.iter_mut().map(std::mem::take).collect();
        let frame = AudioFrame {
            frame_index: self.next_index,
            fs_hz: self.fs_hz,
            samples,
        };
        self.next_index += 1;
        Some(frame)
    }
}

/// Resample a whole stream. Output frames keep the first input frame's
/// length; the last one may be shorter.
pub fn resample(frames: &[AudioFrame], fs_in: u32, fs_out: u32) -> Vec<AudioFrame> {
    if fs_in == fs_out {
        return frames.to_vec();
    }
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let mut rs = Resampler::new(fs_in, fs_out, first.n_channels());
    let mut rf = Reframer::new(first.n_channels(), first.len().max(1), fs_out);
    let mut out = Vec::new();
    for f in frames {
        let y = rs.process(&f.samples);
        out.extend(rf.push(&y));
    }
    out.extend(rf.flush());
    out
}
