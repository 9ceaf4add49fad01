use std::io::Read;
use std::sync::Arc;

use super::{SeparatedChannel, SourceTag, TargetInfo};
use crate::audio_io::{AudioError, AudioFrame, Istft, RawDecoder, Reframer, Resampler, Stft, Window};
use crate::config::PipelineConfig;
use crate::geometry::ScanTables;
use crate::sss::Separator;
use crate::ssl::{Localizer, PotentialDoa, ScanCounters};
use crate::sst::Tracker;
use crate::{SpectralFrame, Vec3};

/// RAW decoding, resampling to the processing rate and reframing to the
/// processing hop.
pub(crate) struct Frontend<R> {
    decoder: RawDecoder<R>,
    resampler: Resampler,
    reframer: Reframer,
    pub input_blocks: u64,
}

impl<R: Read> Frontend<R> {
    pub fn new(reader: R, cfg: &PipelineConfig) -> Result<Self, AudioError> {
        let n = cfg.mapping.len();
        Ok(Self {
            decoder: RawDecoder::new(reader, &cfg.raw, &cfg.mapping)?,
            resampler: Resampler::new(cfg.raw.sample_rate_hz, cfg.general.fs_processing_hz, n),
            reframer: Reframer::new(n, cfg.general.hop_size_samples, cfg.general.fs_processing_hz),
            input_blocks: 0,
        })
    }

    pub fn next_batch(&mut self) -> Option<Result<Vec<AudioFrame>, AudioError>> {
        let block = match self.decoder.next()? {
            Ok(b) => b,
            Err(e) => return Some(Err(e)),
        };
        self.input_blocks += 1;
        let resampled = self.resampler.process(&block.samples);
        Some(Ok(self.reframer.push(&resampled)))
    }
}

pub(crate) struct Analysis {
    stft: Stft,
}

impl Analysis {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Self {
            stft: Stft::new(
                cfg.general.frame_size_samples,
                cfg.general.hop_size_samples,
                Window::Hann,
                cfg.mapping.len(),
            ),
        }
    }

    pub fn push(&mut self, frame: &AudioFrame) -> Vec<SpectralFrame> {
        self.stft.push(frame)
    }
}

pub(crate) struct Localized {
    pub spectrum: SpectralFrame,
    pub doas: Vec<PotentialDoa>,
    /// Noise PSD snapshot `[mic][bin]`, present when the post-filter needs it.
    pub noise: Option<Arc<Vec<Vec<f64>>>>,
}

pub(crate) struct Localization {
    localizer: Localizer,
    share_noise: bool,
}

impl Localization {
    pub fn new(cfg: &PipelineConfig, tables: Arc<ScanTables>) -> Self {
        Self {
            localizer: Localizer::new(cfg, tables),
            share_noise: cfg.sss.enabled && cfg.sss.postfilter.enabled,
        }
    }

    pub fn process(&mut self, spectrum: SpectralFrame) -> Localized {
        let doas = self.localizer.process(&spectrum);
        let noise = self.share_noise.then(|| Arc::new(self.localizer.noise().lambda_d.clone()));
        Localized { spectrum, doas, noise }
    }

    pub fn counters(&self) -> ScanCounters {
        self.localizer.counters
    }
}

pub(crate) struct Tracked {
    pub loc: Localized,
    /// `None` when neither tracking nor fixed targets are configured.
    pub targets: Option<Vec<TargetInfo>>,
}

pub(crate) struct Tracking {
    tracker: Option<Tracker>,
    fixed: Vec<TargetInfo>,
}

impl Tracking {
    pub fn new(cfg: &PipelineConfig) -> Self {
        let fixed: Vec<TargetInfo> = cfg
            .sss
            .fixed_targets
            .iter()
            .enumerate()
            .map(|(i, d)| TargetInfo {
                id: i as u64 + 1,
                tag: SourceTag::Static,
                direction: Vec3::from(*d).normalize(),
                activity: 1.0,
            })
            .collect();
        let tracker = (fixed.is_empty() && cfg.sst.enabled)
            .then(|| Tracker::new(&cfg.sst, cfg.hop_duration_s(), cfg.half_sphere()));
        Self { tracker, fixed }
    }

    pub fn process(&mut self, loc: Localized) -> Tracked {
        let targets = if !self.fixed.is_empty() {
            Some(self.fixed.clone())
        } else {
            self.tracker.as_mut().map(|t| {
                t.step(&loc.doas)
                    .into_iter()
                    .map(|s| TargetInfo {
                        id: s.id,
                        tag: SourceTag::Dynamic,
                        direction: s.direction(),
                        activity: s.activity,
                    })
                    .collect()
            })
        };
        Tracked { loc, targets }
    }
}

pub(crate) struct Separated {
    pub tracked: Tracked,
    pub channels: Vec<SeparatedChannel>,
    /// `[slot][sample]` for this hop.
    pub raw_audio: Option<AudioFrame>,
    pub post_audio: Option<AudioFrame>,
    pub diagnostics: Vec<String>,
}

pub(crate) enum OutMsg {
    Frame(Box<Separated>),
    /// Remaining overlap-add tails at end of stream.
    Tail {
        raw: Option<AudioFrame>,
        post: Option<AudioFrame>,
    },
}

/// Beamforming for the current targets, with targets mapped onto a fixed
/// number of output slots (one output channel each).
pub(crate) struct Separation {
    separator: Option<Separator>,
    slots: Vec<Option<u64>>,
    istft_raw: Option<Istft>,
    istft_post: Option<Istft>,
    frame_size: usize,
    fs_hz: u32,
    last_resets: u64,
}

impl Separation {
    pub fn n_slots(cfg: &PipelineConfig) -> usize {
        if cfg.sss.fixed_targets.is_empty() {
            cfg.sst.max_tracks
        } else {
            cfg.sss.fixed_targets.len()
        }
    }

    pub fn new(cfg: &PipelineConfig) -> Self {
        let enabled = cfg.sss.enabled;
        let n = Self::n_slots(cfg);
        let (frame, hop) = (cfg.general.frame_size_samples, cfg.general.hop_size_samples);
        Self {
            separator: enabled.then(|| Separator::new(cfg)),
            slots: vec![None; n],
            istft_raw: enabled.then(|| Istft::new(frame, hop, Window::Hann, n)),
            istft_post: (enabled && cfg.sss.postfilter.enabled).then(|| Istft::new(frame, hop, Window::Hann, n)),
            frame_size: frame,
            fs_hz: cfg.general.fs_processing_hz,
            last_resets: 0,
        }
    }

    pub fn process(&mut self, tracked: Tracked) -> Separated {
        let mut diagnostics = Vec::new();
        let Some(sep) = self.separator.as_mut() else {
            return Separated {
                tracked,
                channels: Vec::new(),
                raw_audio: None,
                post_audio: None,
                diagnostics,
            };
        };
        let targets = tracked.targets.clone().unwrap_or_default();
        for s in self.slots.iter_mut() {
            if s.is_some_and(|id| !targets.iter().any(|t| t.id == id)) {
                *s = None;
            }
        }
        let mut active = Vec::new();
        for t in &targets {
            let slot = match self.slots.iter().position(|s| *s == Some(t.id)) {
                Some(p) => Some(p),
                None => self.slots.iter().position(Option::is_none).inspect(|&p| self.slots[p] = Some(t.id)),
            };
            match slot {
                Some(p) => active.push((t.id, t.direction, p)),
                None => diagnostics.push(format!("target {}: no free output slot", t.id)),
            }
        }
        let dirs: Vec<(u64, Vec3)> = active.iter().map(|&(id, d, _)| (id, d)).collect();
        let noise = tracked.loc.noise.as_deref().map(Vec::as_slice);
        let outputs = sep.process(&tracked.loc.spectrum, &dirs, noise);
        if let Some(d) = sep.demix() {
            if d.resets > self.last_resets {
                diagnostics.push("separation diverged; demixing reset to the steering solution".to_string());
            }
            self.last_resets = d.resets;
        }

        let mut raw_spec = SpectralFrame::zeros(self.slots.len(), self.frame_size, self.fs_hz, tracked.loc.spectrum.frame_index);
        let mut post_spec = raw_spec.clone();
        for (o, &(_, _, slot)) in outputs.iter().zip(&active) {
            if o.fallback {
                diagnostics.push(format!("target {}: no microphone faces the target; using the full array", o.track_id));
            }
            raw_spec.bins[slot] = o.raw.clone();
            post_spec.bins[slot] = o.spectrum.clone();
        }
        let raw_audio = self.istft_raw.as_mut().map(|i| i.push(&raw_spec).expect("consecutive frames"));
        let post_audio = self.istft_post.as_mut().map(|i| i.push(&post_spec).expect("consecutive frames"));
        let channels = active
            .iter()
            .map(|&(id, _, slot)| SeparatedChannel {
                track_id: id,
                slot,
                samples: raw_audio.as_ref().map(|a| a.samples[slot].clone()).unwrap_or_default(),
                postfiltered: post_audio.as_ref().map(|a| a.samples[slot].clone()),
            })
            .collect();
        Separated {
            tracked,
            channels,
            raw_audio,
            post_audio,
            diagnostics,
        }
    }

    pub fn finish(&mut self) -> OutMsg {
        OutMsg::Tail {
            raw: self.istft_raw.as_mut().map(Istft::finish),
            post: self.istft_post.as_mut().map(Istft::finish),
        }
    }
}
