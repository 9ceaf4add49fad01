//! Microphone-array audition: sound source localization, tracking and
//! separation over a streaming spectral pipeline.
//!
//! Stages, in pipeline order:
//!
//! - [`audio_io`]: RAW PCM decoding, channel mapping, resampling, STFT/ISTFT.
//! - [`ssl`]: MCRA noise estimation, GCC-PHAT and coarse-to-fine SRP-PHAT scan.
//! - [`sst`]: one Kalman filter per tracked source with probabilistic
//!   assignment of potential DOAs.
//! - [`sss`]: subarray delay-and-sum or geometric source separation, plus
//!   post-filtering.
//! - [`pipeline`]: threaded wiring of the stages and the JSON event stream.
//!
//! [`geometry`] holds the scan grids and TDOA tables; [`harness`] renders
//! synthetic scenes and provides the reference implementations used by the
//! test suites.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod audio_io;
pub mod config;
pub mod geometry;
pub mod harness;
pub mod pipeline;
pub mod sss;
pub mod ssl;
pub mod sst;

pub use num_complex::Complex64;

pub type Vec3 = nalgebra::Vector3<f64>;

pub use audio_io::{AudioFrame, SpectralFrame};
pub use config::{parse_config, MicSpec, PipelineConfig};
pub use geometry::{PairTable, ScanGrid, ScanTables};
pub use pipeline::{PipelineEvent, RunReport};
pub use ssl::{NoiseEstimate, PotentialDoa};
pub use sst::TrackedSource;

/// Angle in radians between two (not necessarily unit) vectors.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos()
}

/// Unit vector from azimuth (from +x toward +y) and elevation, in degrees.
pub fn direction_from_az_el(az_deg: f64, el_deg: f64) -> Vec3 {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}
