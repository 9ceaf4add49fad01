use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::named_array;
use crate::audio_io::AudioFrame;
use crate::config::MicSpec;
use crate::{direction_from_az_el, Vec3};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("unknown array name {0:?}")]
    UnknownArray(String),
    #[error("source {0}: {1}")]
    Source(usize, String),
    #[error("scene: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArraySpec {
    Named(String),
    Custom(Vec<MicSpec>),
}

impl ArraySpec {
    pub fn mics(&self) -> Result<Vec<MicSpec>, SceneError> {
        match self {
            ArraySpec::Named(n) => named_array(n).ok_or_else(|| SceneError::UnknownArray(n.clone())),
            ArraySpec::Custom(m) => Ok(m.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    White,
    Tone { frequency_hz: f64 },
    /// Low-passed noise with a syllable-rate on/off envelope.
    SpeechShaped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    Fixed { direction: [f64; 3] },
    /// `(time_s, azimuth_deg, elevation_deg)` keyframes, linearly
    /// interpolated and held constant outside their span.
    AzElPath { points: Vec<[f64; 3]> },
}

impl Trajectory {
    pub fn direction_at(&self, t: f64) -> Vec3 {
        match self {
            Trajectory::Fixed { direction } => Vec3::from(*direction).normalize(),
            Trajectory::AzElPath { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                let [_, az, el] = if t <= first[0] {
                    first
                } else if t >= last[0] {
                    last
                } else {
                    let i = points.windows(2).position(|w| t < w[1][0]).unwrap_or(0);
                    let (a, b) = (points[i], points[i + 1]);
                    let u = (t - a[0]) / (b[0] - a[0]);
                    [t, a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])]
                };
                direction_from_az_el(az, el)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub signal: SignalSpec,
    pub trajectory: Trajectory,
    /// RMS level in dB (0 dB = unit RMS).
    pub level_db: f64,
    /// Signal seed; defaults to the source's position in the list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onset_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_s: Option<f64>,
}

impl SourceSpec {
    pub fn fixed(signal: SignalSpec, direction: Vec3, level_db: f64, seed: u64) -> Self {
        Self {
            signal,
            trajectory: Trajectory::Fixed {
                direction: direction.normalize().into(),
            },
            level_db,
            seed: Some(seed),
            onset_s: None,
            offset_s: None,
        }
    }

    pub fn active_at(&self, t: f64) -> bool {
        self.onset_s.is_none_or(|a| t >= a) && self.offset_s.is_none_or(|b| t < b)
    }
}

/// Per-microphone gain as a function of the angle between the mic's
/// orientation and the source direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Directivity {
    /// Unit gain everywhere.
    None,
    /// `cos²(θ·π / (2·fov))` inside the field of view, `floor_db` outside.
    RaisedCosine { floor_db: f64 },
}

impl Default for Directivity {
    fn default() -> Self {
        Directivity::RaisedCosine { floor_db: -30.0 }
    }
}

impl Directivity {
    pub fn gain(&self, mic: &MicSpec, dir: &Vec3) -> f64 {
        match *self {
            Directivity::None => 1.0,
            Directivity::RaisedCosine { floor_db } => {
                if mic.is_omni() {
                    return 1.0;
                }
                let theta = crate::angle_between(&mic.orientation(), dir);
                let half = mic.fov_deg.to_radians() / 2.0;
                if theta <= half + 1e-12 {
                    (theta * PI / (4.0 * half)).cos().powi(2)
                } else {
                    10f64.powf(floor_db / 20.0)
                }
            }
        }
    }
}

fn default_c() -> f64 {
    343.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub array: ArraySpec,
    pub fs_hz: u32,
    #[serde(default = "default_c")]
    pub speed_of_sound_mps: f64,
    pub duration_s: f64,
    /// Per-mic independent white noise RMS level in dB; `null` for none.
    pub noise_floor_db: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub directivity: Directivity,
    pub sources: Vec<SourceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTruth {
    pub source: usize,
    pub direction: [f64; 3],
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub frame: u64,
    pub time_s: f64,
    pub sources: Vec<SourceTruth>,
}

/// Rendered microphone signals with their decomposition.
#[derive(Debug, Clone)]
pub struct Rendering {
    pub fs_hz: u32,
    pub mics: Vec<MicSpec>,
    /// `[mic][sample]`: sum of contributions and noise.
    pub mixture: Vec<Vec<f64>>,
    /// `[source][mic][sample]`.
    pub contributions: Vec<Vec<Vec<f64>>>,
    /// `[mic][sample]`.
    pub noise: Vec<Vec<f64>>,
}

/// Half-width of the interpolation kernel used for fractional delays.
const KERNEL_HALF: i64 = 32;

fn kernel(x: f64) -> f64 {
    if x.abs() >= KERNEL_HALF as f64 {
        return 0.0;
    }
    let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
    let w = 0.5 * (1.0 + (PI * x / KERNEL_HALF as f64).cos());
    sinc * w
}

/// Unit-RMS source signal of `len` samples.
pub fn source_signal(spec: &SignalSpec, fs: f64, len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = match spec {
        SignalSpec::White => (0..len).map(|_| StandardNormal.sample(&mut rng)).collect(),
        SignalSpec::Tone { frequency_hz } => {
            let phase: f64 = rng.random::<f64>() * 2.0 * PI;
            (0..len)
                .map(|n| 2f64.sqrt() * (2.0 * PI * frequency_hz * n as f64 / fs + phase).sin())
                .collect()
        }
        SignalSpec::SpeechShaped => {
            // two-pole low-pass around 1 kHz, gated by 150-350 ms bursts
            let r = (-2.0 * PI * 1000.0 / fs).exp();
            let (mut y1, mut y2) = (0.0, 0.0);
            let mut env = Vec::with_capacity(len);
            let mut on = true;
            while env.len() < len {
                let dur = (rng.random_range(0.15..0.35) * fs) as usize;
                let level = if on { 1.0 } else { 0.05 };
                env.extend(std::iter::repeat_n(level, dur));
                on = !on;
            }
            (0..len)
                .map(|n| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    let y = e + 2.0 * r * y1 - r * r * y2;
                    y2 = y1;
                    y1 = y;
                    y * env[n]
                })
                .collect()
        }
    };
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    x
}

impl Scene {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.fs_hz as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.fs_hz == 0 || !(self.duration_s > 0.0) || !(self.speed_of_sound_mps > 0.0) {
            return Err(SceneError::Invalid("fs, duration and c must be positive".into()));
        }
        self.array.mics()?;
        for (i, s) in self.sources.iter().enumerate() {
            match &s.trajectory {
                Trajectory::Fixed { direction } if Vec3::from(*direction).norm() < 1e-9 => {
                    return Err(SceneError::Source(i, "direction must be non-zero".into()))
                }
                Trajectory::AzElPath { points } if points.is_empty() => {
                    return Err(SceneError::Source(i, "path needs at least one point".into()))
                }
                Trajectory::AzElPath { points } if points.windows(2).any(|w| w[1][0] <= w[0][0]) => {
                    return Err(SceneError::Source(i, "path times must increase".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Free-field far-field rendering with per-mic directivity gains.
    pub fn render(&self) -> Result<Rendering, SceneError> {
        self.validate()?;
        let mics = self.array.mics()?;
        let fs = self.fs_hz as f64;
        let n = self.n_samples();
        let c = self.speed_of_sound_mps;
        let max_delay = mics.iter().map(|m| m.position().norm()).fold(0.0, f64::max) * fs / c;
        let pad = KERNEL_HALF as usize + max_delay.ceil() as usize + 2;

        let mut contributions = Vec::with_capacity(self.sources.len());
        for (si, src) in self.sources.iter().enumerate() {
            let seed = src.seed.unwrap_or(si as u64 + 1);
            let sig_seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed;
            let s = source_signal(&src.signal, fs, n + 2 * pad, sig_seed);
            let amp = 10f64.powf(src.level_db / 20.0);
            let gate: Vec<f64> = (0..n).map(|t| if src.active_at(t as f64 / fs) { amp } else { 0.0 }).collect();
            let per_mic = mics
                .iter()
                .map(|m| {
                    let p = m.position();
                    (0..n)
                        .map(|t| {
                            if gate[t] == 0.0 {
                                return 0.0;
                            }
                            let d = src.trajectory.direction_at(t as f64 / fs);
                            let g = self.directivity.gain(m, &d);
                            // x_m(t) = s(t + p·d / c)
                            let pos = (t + pad) as f64 + fs * p.dot(&d) / c;
                            let base = pos.floor() as i64;
                            let mut acc = 0.0;
                            for i in base - KERNEL_HALF + 1..=base + KERNEL_HALF {
                                acc += s[i as usize] * kernel(pos - i as f64);
                            }
                            acc * g * gate[t]
                        })
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>();
            contributions.push(per_mic);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x6E01_5E00);
        let noise: Vec<Vec<f64>> = mics
            .iter()
            .map(|_| match self.noise_floor_db {
                Some(db) => {
                    let a = 10f64.powf(db / 20.0);
                    (0..n).map(|_| a * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect()
                }
                None => vec![0.0; n],
            })
            .collect();

        let mixture = (0..mics.len())
            .map(|m| {
                (0..n)
                    .map(|t| noise[m][t] + contributions.iter().map(|c| c[m][t]).sum::<f64>())
                    .collect()
            })
            .collect();
        Ok(Rendering {
            fs_hz: self.fs_hz,
            mics,
            mixture,
            contributions,
            noise,
        })
    }

    /// Source directions at the center of each analysis frame.
    pub fn ground_truth(&self, frame_size: usize, hop: usize) -> Vec<FrameTruth> {
        let fs = self.fs_hz as f64;
        let n = self.n_samples();
        let n_frames = if n < frame_size { 0 } else { (n - frame_size) / hop + 1 };
        (0..n_frames)
            .map(|k| {
                let t = (k * hop) as f64 / fs + frame_size as f64 / (2.0 * fs);
                FrameTruth {
                    frame: k as u64,
                    time_s: t,
                    sources: self
                        .sources
                        .iter()
                        .enumerate()
                        .map(|(i, s)| SourceTruth {
                            source: i,
                            direction: s.trajectory.direction_at(t).into(),
                            active: s.active_at(t),
                        })
                        .collect(),
                }
            })
            .collect()
    }
}

impl Rendering {
    pub fn n_samples(&self) -> usize {
        self.mixture.first().map_or(0, Vec::len)
    }

    /// Splits `[mic][sample]` signals into hop-sized frames.
    pub fn frames_of(signals: &[Vec<f64>], fs_hz: u32, hop: usize) -> Vec<AudioFrame> {
        let n = signals.first().map_or(0, Vec::len);
        (0..n / hop)
            .map(|k| AudioFrame {
                frame_index: k as u64,
                fs_hz,
                samples: signals.iter().map(|ch| ch[k * hop..(k + 1) * hop].to_vec()).collect(),
            })
            .collect()
    }

    pub fn frames(&self, hop: usize) -> Vec<AudioFrame> {
        Self::frames_of(&self.mixture, self.fs_hz, hop)
    }

    /// Interleaved little-endian RAW of the mixture (full scale = 1.0).
    pub fn to_raw(&self, bits: u32) -> Result<Vec<u8>, crate::audio_io::AudioError> {
        let all = AudioFrame {
            frame_index: 0,
            fs_hz: self.fs_hz,
            samples: self.mixture.clone(),
        };
        crate::audio_io::encode_raw(std::slice::from_ref(&all), bits)
    }
}
