use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Instant, SystemTime};

use crossbeam_channel::{bounded, Sender};
use thiserror::Error;

use super::stages::{Analysis, Frontend, Localization, OutMsg, Separated, Separation, Tracking};
use super::{pot_line, src_line, PipelineEvent, Sink};
use crate::audio_io::{encode_raw, AudioError, AudioFrame};
use crate::config::PipelineConfig;
use crate::geometry::{CacheError, GeometryError, ScanParams, ScanTables};
use crate::ssl::ScanCounters;

pub const SEPARATED_FILE: &str = "separated.raw";
pub const POSTFILTERED_FILE: &str = "postfiltered.raw";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("input: {0}")]
    Source(#[from] AudioError),
    #[error("output: {0}")]
    Sink(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// One thread per stage; otherwise everything runs on the caller's thread.
    pub threaded: bool,
    pub queue_capacity: usize,
    /// Checked between input blocks; setting it ends the run cleanly.
    pub stop: Option<Arc<AtomicBool>>,
    /// Directory of the scan-table cache, if any.
    pub table_cache_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            threaded: true,
            queue_capacity: 16,
            stop: None,
            table_cache_dir: None,
        }
    }
}

/// Output destinations; all optional.
#[derive(Default)]
pub struct Sinks {
    pub doa: Option<Sink>,
    pub tracks: Option<Sink>,
    /// Receives `separated.raw` (and `postfiltered.raw`), one channel per
    /// output slot.
    pub sep_dir: Option<PathBuf>,
    pub events: Option<Sender<PipelineEvent>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Spectral frames processed.
    pub frames: u64,
    /// RAW input blocks decoded.
    pub input_blocks: u64,
    pub audio_seconds: f64,
    pub wall_seconds: f64,
    /// Wall time over audio time.
    pub realtime_factor: f64,
    pub counters: ScanCounters,
    pub n_pairs: usize,
    pub fine_grid_points: usize,
    pub coarse_grid_points: usize,
    /// Largest number of messages observed in any inter-stage queue.
    pub max_queue_depth: usize,
    pub queue_capacity: usize,
    pub dropped_lines: u64,
    pub diagnostics: u64,
    pub separated_channels: usize,
}

fn build_tables(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Arc<ScanTables>, PipelineError> {
    let params = ScanParams::from_config(cfg);
    let tables = match &opts.table_cache_dir {
        Some(dir) => ScanTables::build_cached(&cfg.general.mics, &params, dir)?,
        None => ScanTables::build(&cfg.general.mics, &params)?,
    };
    Ok(Arc::new(tables))
}

struct Output {
    sinks: Sinks,
    raw_file: Option<BufWriter<File>>,
    post_file: Option<BufWriter<File>>,
    bits: u32,
    frames: u64,
    diagnostics: u64,
}

impl Output {
    fn new(cfg: &PipelineConfig, sinks: Sinks) -> io::Result<Self> {
        let (mut raw_file, mut post_file) = (None, None);
        if let Some(dir) = sinks.sep_dir.as_ref().filter(|_| cfg.sss.enabled) {
            std::fs::create_dir_all(dir)?;
            raw_file = Some(BufWriter::new(File::create(dir.join(SEPARATED_FILE))?));
            if cfg.sss.postfilter.enabled {
                post_file = Some(BufWriter::new(File::create(dir.join(POSTFILTERED_FILE))?));
            }
        }
        Ok(Self {
            sinks,
            raw_file,
            post_file,
            bits: cfg.sss.output.bits_per_sample,
            frames: 0,
            diagnostics: 0,
        })
    }

    fn write_audio(file: &mut Option<BufWriter<File>>, audio: Option<&AudioFrame>, bits: u32) -> io::Result<()> {
        if let (Some(f), Some(a)) = (file.as_mut(), audio) {
            let bytes = encode_raw(std::slice::from_ref(a), bits).map_err(io::Error::other)?;
            f.write_all(&bytes)?;
        }
        Ok(())
    }

    fn emit(&mut self, ev: PipelineEvent) {
        if let Some(tx) = &self.sinks.events {
            // a closed observer is not an error for the run
            let _ = tx.send(ev);
        }
    }

    fn handle(&mut self, msg: OutMsg) -> io::Result<()> {
        let s = match msg {
            OutMsg::Frame(s) => s,
            OutMsg::Tail { raw, post } => {
                Self::write_audio(&mut self.raw_file, raw.as_ref(), self.bits)?;
                Self::write_audio(&mut self.post_file, post.as_ref(), self.bits)?;
                return Ok(());
            }
        };
        let Separated {
            tracked,
            channels,
            raw_audio,
            post_audio,
            diagnostics,
        } = *s;
        let k = tracked.loc.spectrum.frame_index;
        self.frames += 1;
        if let Some(sink) = self.sinks.doa.as_mut() {
            sink.write_line(&pot_line(k, &tracked.loc.doas))?;
        }
        if let (Some(sink), Some(t)) = (self.sinks.tracks.as_mut(), tracked.targets.as_ref()) {
            sink.write_line(&src_line(k, t))?;
        }
        Self::write_audio(&mut self.raw_file, raw_audio.as_ref(), self.bits)?;
        Self::write_audio(&mut self.post_file, post_audio.as_ref(), self.bits)?;

        if self.sinks.events.is_some() {
            let timestamp = SystemTime::now();
            self.emit(PipelineEvent::PotentialDoaSet {
                frame_index: k,
                timestamp,
                doas: tracked.loc.doas,
            });
            if let Some(sources) = tracked.targets {
                self.emit(PipelineEvent::TrackedSourceSet {
                    frame_index: k,
                    timestamp,
                    sources,
                });
            }
            if raw_audio.is_some() {
                self.emit(PipelineEvent::SeparatedFrameSet {
                    frame_index: k,
                    timestamp,
                    outputs: channels,
                });
            }
        }
        for message in diagnostics {
            self.diagnostics += 1;
            log::warn!("frame {k}: {message}");
            self.emit(PipelineEvent::Diagnostics {
                frame_index: k,
                timestamp: SystemTime::now(),
                message,
            });
        }
        Ok(())
    }

    fn finish(&mut self) -> io::Result<u64> {
        let mut dropped = 0;
        for s in [self.sinks.doa.as_mut(), self.sinks.tracks.as_mut()].into_iter().flatten() {
            s.finish()?;
            dropped += s.dropped();
        }
        for f in [self.raw_file.as_mut(), self.post_file.as_mut()].into_iter().flatten() {
            f.flush()?;
        }
        Ok(dropped)
    }
}

fn stopped(stop: &Option<Arc<AtomicBool>>) -> bool {
    stop.as_ref().is_some_and(|s| s.load(Ordering::Relaxed))
}

fn send<T>(tx: &Sender<T>, msg: T, depth: &AtomicUsize) -> bool {
    let ok = tx.send(msg).is_ok();
    depth.fetch_max(tx.len(), Ordering::Relaxed);
    ok
}

/// Processes `source` (interleaved RAW as configured) to completion or
/// until the stop flag is raised.
pub fn run<R: Read + Send>(
    cfg: &PipelineConfig,
    source: R,
    sinks: Sinks,
    opts: &RunOptions,
) -> Result<RunReport, PipelineError> {
    let start = Instant::now();
    let tables = build_tables(cfg, opts)?;
    let mut frontend = Frontend::new(source, cfg)?;
    let mut analysis = Analysis::new(cfg);
    let mut localization = Localization::new(cfg, tables.clone());
    let mut tracking = Tracking::new(cfg);
    let mut separation = Separation::new(cfg);
    let mut output = Output::new(cfg, sinks)?;
    let depth = AtomicUsize::new(0);
    let cap = opts.queue_capacity.max(1);

    let (input_result, counters, sink_result) = if opts.threaded {
        std::thread::scope(|scope| {
            let (tx_a, rx_a) = bounded(cap);
            let (tx_s, rx_s) = bounded(cap);
            let (tx_l, rx_l) = bounded(cap);
            let (tx_t, rx_t) = bounded(cap);
            let (tx_o, rx_o) = bounded(cap);
            let depth = &depth;
            let stop = &opts.stop;
            let frontend = &mut frontend;
            let source = scope.spawn(move || -> Result<(), AudioError> {
                while !stopped(stop) {
                    match frontend.next_batch() {
                        None => break,
                        Some(Err(e)) => return Err(e),
                        Some(Ok(frames)) => {
                            for f in frames {
                                if !send(&tx_a, f, depth) {
                                    return Ok(());
                                }
                            }
                        }
                    }
                }
                Ok(())
            });
            let analysis = &mut analysis;
            scope.spawn(move || {
                for f in rx_a {
                    for s in analysis.push(&f) {
                        if !send(&tx_s, s, depth) {
                            return;
                        }
                    }
                }
            });
            let localization = &mut localization;
            let ssl = scope.spawn(move || {
                for s in rx_s {
                    if !send(&tx_l, localization.process(s), depth) {
                        break;
                    }
                }
                localization.counters()
            });
            let tracking = &mut tracking;
            scope.spawn(move || {
                for l in rx_l {
                    if !send(&tx_t, tracking.process(l), depth) {
                        return;
                    }
                }
            });
            let separation = &mut separation;
            scope.spawn(move || {
                for t in rx_t {
                    if !send(&tx_o, OutMsg::Frame(Box::new(separation.process(t))), depth) {
                        return;
                    }
                }
                send(&tx_o, separation.finish(), depth);
            });
            let mut sink_result = Ok(());
            for m in rx_o {
                if let Err(e) = output.handle(m) {
                    sink_result = Err(e);
                    break;
                }
            }
            let input_result = source.join().expect("source stage panicked");
            let counters = ssl.join().expect("localization stage panicked");
            (input_result, counters, sink_result)
        })
    } else {
        let mut run_seq = || -> Result<Result<(), AudioError>, io::Error> {
            while !stopped(&opts.stop) {
                let frames = match frontend.next_batch() {
                    None => break,
                    Some(Err(e)) => return Ok(Err(e)),
                    Some(Ok(f)) => f,
                };
                for f in frames {
                    for s in analysis.push(&f) {
                        let sep = separation.process(tracking.process(localization.process(s)));
                        output.handle(OutMsg::Frame(Box::new(sep)))?;
                    }
                }
            }
            output.handle(separation.finish())?;
            Ok(Ok(()))
        };
        match run_seq() {
            Ok(r) => (r, localization.counters(), Ok(())),
            Err(e) => (Ok(()), localization.counters(), Err(e)),
        }
    };
    input_result?;
    sink_result?;
    let dropped_lines = output.finish()?;

    let wall = start.elapsed().as_secs_f64();
    let hop = cfg.general.hop_size_samples as f64;
    let fs = cfg.general.fs_processing_hz as f64;
    let audio_seconds = if output.frames == 0 {
        0.0
    } else {
        (output.frames as f64 * hop + (cfg.general.frame_size_samples as f64 - hop)) / fs
    };
    Ok(RunReport {
        frames: output.frames,
        input_blocks: frontend.input_blocks,
        audio_seconds,
        wall_seconds: wall,
        realtime_factor: if audio_seconds > 0.0 { wall / audio_seconds } else { 0.0 },
        counters,
        n_pairs: tables.pairs().len(),
        fine_grid_points: tables.fine.len(),
        coarse_grid_points: tables.coarse.len(),
        max_queue_depth: depth.load(Ordering::Relaxed),
        queue_capacity: cap,
        dropped_lines,
        diagnostics: output.diagnostics,
        separated_channels: if cfg.sss.enabled { Separation::n_slots(cfg) } else { 0 },
    })
}
