//! Sound source separation: directivity-based subarrays, delay-and-sum or
//! geometric source separation, and a leakage-aware post-filter.

mod beamform;
mod gss;
mod postfilter;
mod steering;

pub use beamform::{apply_weights, delay_and_sum};
pub use gss::{gss_step, steering_solution, DemixState, DIVERGENCE_RATIO};
pub use postfilter::{expint_e1, log_mmse_gain, Postfilter};
pub use steering::{select_subarray, SteeringTarget};

use crate::config::{MicSpec, PipelineConfig, SeparationMethod, SssConfig};
use crate::{Complex64, SpectralFrame, Vec3};

/// One separated output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutput {
    pub track_id: u64,
    pub direction: Vec3,
    pub subarray: Vec<usize>,
    /// No microphone faced the target; the full array was used.
    pub fallback: bool,
    /// Linear weights `[bin][mic]` that produced `raw`.
    pub weights: Vec<Vec<Complex64>>,
    /// Post-filter gains, when enabled.
    pub gains: Option<Vec<f64>>,
    /// Beamformer output before post-filtering.
    pub raw: Vec<Complex64>,
    /// Final output.
    pub spectrum: Vec<Complex64>,
}

impl BeamOutput {
    /// Runs the same linear processing (weights, then gains) on another
    /// frame, e.g. a single source's contribution.
    pub fn apply(&self, frame: &SpectralFrame) -> Vec<Complex64> {
        apply_weights(frame, &self.weights, self.gains.as_deref())
    }

    pub fn as_frame(&self, frame_index: u64, fs_hz: u32, frame_size: usize) -> SpectralFrame {
        SpectralFrame {
            frame_index,
            fs_hz,
            frame_size,
            bins: vec![self.spectrum.clone()],
        }
    }
}

/// Per-frame separation stage.
pub struct Separator {
    cfg: SssConfig,
    mics: Vec<MicSpec>,
    fs: f64,
    c: f64,
    frame_size: usize,
    demix: Option<DemixState>,
    postfilter: Postfilter,
}

impl Separator {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Self::with_parts(
            &cfg.sss,
            cfg.general.mics.clone(),
            cfg.general.fs_processing_hz as f64,
            cfg.general.speed_of_sound_mps,
            cfg.general.frame_size_samples,
        )
    }

    pub fn with_parts(cfg: &SssConfig, mics: Vec<MicSpec>, fs: f64, c: f64, frame_size: usize) -> Self {
        Self {
            postfilter: Postfilter::new(&cfg.postfilter),
            cfg: cfg.clone(),
            mics,
            fs,
            c,
            frame_size,
            demix: None,
        }
    }

    pub fn demix(&self) -> Option<&DemixState> {
        self.demix.as_ref()
    }

    pub fn targets(&self, targets: &[(u64, Vec3)]) -> Vec<SteeringTarget> {
        let subarray = self.cfg.use_subarray && self.cfg.method == SeparationMethod::DelayAndSum;
        targets
            .iter()
            .map(|&(id, d)| SteeringTarget::new(id, d, &self.mics, subarray, self.fs, self.c))
            .collect()
    }

    /// Separates one frame. `noise_psd[mic][bin]` is the stationary noise
    /// estimate used by the post-filter.
    pub fn process(
        &mut self,
        frame: &SpectralFrame,
        targets: &[(u64, Vec3)],
        noise_psd: Option<&[Vec<f64>]>,
    ) -> Vec<BeamOutput> {
        if targets.is_empty() {
            self.demix = None;
            return Vec::new();
        }
        let steering = self.targets(targets);
        let n_mics = self.mics.len();
        let n_bins = frame.n_bins();
        let (raw, weights): (Vec<Vec<Complex64>>, Vec<Vec<Vec<Complex64>>>) = match self.cfg.method {
            SeparationMethod::DelayAndSum => steering
                .iter()
                .map(|t| {
                    let w: Vec<Vec<Complex64>> =
                        (0..n_bins).map(|k| t.das_weights(n_mics, k, self.frame_size)).collect();
                    (apply_weights(frame, &w, None), w)
                })
                .unzip(),
            SeparationMethod::Gss => {
                let state = self.demix.get_or_insert_with(|| {
                    DemixState::new(
                        &steering,
                        n_mics,
                        self.frame_size,
                        self.cfg.gss_step_size,
                        self.cfg.gss_constraint_weight,
                    )
                });
                state.retarget(&steering);
                let weights: Vec<_> = (0..steering.len()).map(|t| state.weights_of(t)).collect();
                (gss_step(frame, state), weights)
            }
        };
        let ids: Vec<u64> = steering.iter().map(|t| t.track_id).collect();
        let gains = self
            .cfg
            .postfilter
            .enabled
            .then(|| self.postfilter.gains(&ids, &raw, &weights, noise_psd));
        steering
            .into_iter()
            .zip(raw)
            .zip(weights)
            .enumerate()
            .map(|(i, ((t, raw), weights))| {
                let g = gains.as_ref().map(|g| g[i].clone());
                let spectrum = match &g {
                    Some(g) => raw.iter().zip(g).map(|(y, g)| y * g).collect(),
                    None => raw.clone(),
                };
                BeamOutput {
                    track_id: t.track_id,
                    direction: t.direction,
                    subarray: t.subarray,
                    fallback: t.fallback,
                    weights,
                    gains: g,
                    raw,
                    spectrum,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{stft_signal, Window};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn closed_cube() -> Vec<MicSpec> {
        let mut m = Vec::new();
        for &x in &[-0.05, 0.05] {
            for &y in &[-0.05, 0.05] {
                for &z in &[-0.05, 0.05] {
                    m.push(MicSpec::directional([x, y, z], [x, y, 0.0], 180.0));
                }
            }
        }
        m
    }

    fn random_frame(n_ch: usize, seed: u64) -> SpectralFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch: Vec<Vec<f64>> = (0..n_ch)
            .map(|_| (0..256).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        stft_signal(&ch, 16000, 256, 256, Window::Hann).remove(0)
    }

    #[test]
    fn cube_subarray_facing_minus_x() {
        let mics = closed_cube();
        let (sub, fallback) = select_subarray(&mics, &-Vec3::x());
        assert!(!fallback);
        assert_eq!(sub.len(), 4);
        assert!(sub.iter().all(|&m| mics[m].orientation().dot(&-Vec3::x()) > 0.0));
    }

    #[test]
    fn omni_and_boundary_cases() {
        let omni: Vec<MicSpec> = (0..5).map(|i| MicSpec::omni([i as f64 * 0.01, 0.0, 0.0])).collect();
        assert_eq!(select_subarray(&omni, &Vec3::z()).0, vec![0, 1, 2, 3, 4]);
        let edge = vec![MicSpec::directional([0.0; 3], [1.0, 0.0, 0.0], 180.0)];
        assert_eq!(select_subarray(&edge, &Vec3::y()), (vec![0], false));
        let away = vec![MicSpec::directional([0.0; 3], [1.0, 0.0, 0.0], 90.0)];
        assert_eq!(select_subarray(&away, &-Vec3::x()), (vec![0], true));
    }

    #[test]
    fn identical_channels_zero_delay() {
        let one = random_frame(1, 1);
        let mut frame = one.clone();
        frame.bins = vec![one.bins[0].clone(); 4];
        let mics: Vec<MicSpec> = (0..4).map(|_| MicSpec::omni([0.0; 3])).collect();
        let t = SteeringTarget::new(1, Vec3::x(), &mics, true, 16000.0, 343.0);
        let y = delay_and_sum(&frame, &t);
        for (a, b) in y.bins[0].iter().zip(&one.bins[0]) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn das_is_linear_and_matches_weights() {
        let mics = closed_cube();
        let t = SteeringTarget::new(1, Vec3::new(1.0, 2.0, 0.5), &mics, true, 16000.0, 343.0);
        let (x1, x2) = (random_frame(8, 2), random_frame(8, 3));
        let mut mix = x1.clone();
        for (m, ch) in mix.bins.iter_mut().enumerate() {
            for (k, v) in ch.iter_mut().enumerate() {
                *v = *v * 2.0 - x2.bins[m][k] * 0.5;
            }
        }
        let (y1, y2, ym) = (delay_and_sum(&x1, &t), delay_and_sum(&x2, &t), delay_and_sum(&mix, &t));
        let w: Vec<_> = (0..129).map(|k| t.das_weights(8, k, 256)).collect();
        let yw = apply_weights(&x1, &w, None);
        for k in 0..129 {
            let lin = y1.bins[0][k] * 2.0 - y2.bins[0][k] * 0.5;
            assert!((ym.bins[0][k] - lin).norm() < 1e-9);
            assert!((yw[k] - y1.bins[0][k]).norm() < 1e-12);
        }
    }

    #[test]
    fn gss_single_target_without_adaptation_is_das() {
        let mics = closed_cube();
        let targets = vec![SteeringTarget::new(7, Vec3::new(0.3, -1.0, 0.2), &mics, false, 16000.0, 343.0)];
        let mut state = DemixState::new(&targets, 8, 256, 0.0, 0.5);
        for seed in 0..3 {
            let f = random_frame(8, seed);
            let y = gss_step(&f, &mut state);
            let das = delay_and_sum(&f, &targets[0]);
            for k in 0..129 {
                assert!((y[0][k] - das.bins[0][k]).norm() < 1e-9);
            }
        }
        assert!(state.constraint_residual() < 1e-18);
    }

    #[test]
    fn gss_stays_finite_and_reanchors() {
        let mics: Vec<MicSpec> = closed_cube().iter().map(|m| MicSpec::omni(m.position_m)).collect();
        let mk = |az: f64| {
            vec![
                SteeringTarget::new(1, crate::direction_from_az_el(az, 0.0), &mics, false, 16000.0, 343.0),
                SteeringTarget::new(2, crate::direction_from_az_el(az + 90.0, 0.0), &mics, false, 16000.0, 343.0),
            ]
        };
        let mut state = DemixState::new(&mk(0.0), 8, 256, 0.01, 0.5);
        for seed in 0..50 {
            gss_step(&random_frame(8, seed), &mut state);
        }
        state.retarget(&mk(10.0));
        let jumped = state.constraint_residual();
        for seed in 50..150 {
            let y = gss_step(&random_frame(8, seed), &mut state);
            assert!(y.iter().flatten().all(|v| v.is_finite()));
        }
        assert!(state.constraint_residual() < jumped, "{} vs {jumped}", state.constraint_residual());
    }
}
