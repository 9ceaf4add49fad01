//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use audition_core::geometry::{ScanParams, ScanTables};
use audition_core::harness::{named_array, spectra, ArraySpec, Directivity, Scene, SignalSpec, SourceSpec};
use audition_core::{direction_from_az_el, PipelineConfig, SpectralFrame};

pub const FS: u32 = 16000;
pub const FRAME: usize = 512;
pub const HOP: usize = 256;

pub fn config(array: &str) -> PipelineConfig {
    PipelineConfig::new(named_array(array).expect("known array"), FS, FRAME, HOP)
}

pub fn tables(cfg: &PipelineConfig) -> Arc<ScanTables> {
    Arc::new(ScanTables::build(&cfg.general.mics, &ScanParams::from_config(cfg)).expect("scan tables"))
}

/// Two speech-shaped sources at -20 dB over a -45 dB noise floor.
pub fn scene(array: &str, duration_s: f64) -> Scene {
    Scene {
        array: ArraySpec::Named(array.into()),
        fs_hz: FS,
        speed_of_sound_mps: 343.0,
        duration_s,
        noise_floor_db: Some(-45.0),
        seed: 1,
        directivity: Directivity::default(),
        sources: vec![
            SourceSpec::fixed(SignalSpec::SpeechShaped, direction_from_az_el(30.0, 15.0), -20.0, 1),
            SourceSpec::fixed(SignalSpec::SpeechShaped, direction_from_az_el(-90.0, 40.0), -22.0, 2),
        ],
    }
}

pub fn frames(array: &str, n: usize) -> Vec<SpectralFrame> {
    let duration = ((n + 1) * HOP) as f64 / FS as f64;
    let r = scene(array, duration).render().expect("render");
    spectra(&r.mixture, FS, FRAME, HOP)
}

/// Interleaved 16-bit RAW of `scene(array, duration_s)`.
pub fn raw(array: &str, duration_s: f64) -> Vec<u8> {
    scene(array, duration_s).render().expect("render").to_raw(16).expect("encode")
}
