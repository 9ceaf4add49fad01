//! Multi-source tracking: one constant-velocity Kalman filter per source,
//! probabilistic assignment of potential DOAs and track birth/death.

mod assign;
mod gmm;
mod kalman;

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix6, Vector6};

pub use assign::{assign, spatial_likelihood, Assignment, Hypothesis, PowerModels};
pub use gmm::Gmm;
pub use kalman::{observation_matrix, process_noise, transition, KalmanError, KalmanState};

use crate::config::SstConfig;
use crate::ssl::PotentialDoa;
use crate::Vec3;

/// Snapshot of a confirmed track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedSource {
    pub id: u64,
    pub state: Vector6<f64>,
    pub covariance: Matrix6<f64>,
    pub activity: f64,
    pub frames_since_observed: u32,
}

impl TrackedSource {
    /// Unit direction of the tracked source.
    pub fn direction(&self) -> Vec3 {
        let p = Vec3::new(self.state[0], self.state[1], self.state[2]);
        if p.norm() > 0.0 {
            p.normalize()
        } else {
            Vec3::z()
        }
    }

    pub fn velocity(&self) -> Vec3 {
        Vec3::new(self.state[3], self.state[4], self.state[5])
    }
}

#[derive(Debug, Clone)]
struct Track {
    /// Output id, assigned at confirmation.
    id: Option<u64>,
    filter: KalmanState,
    activity: f64,
    frames_since_observed: u32,
    consecutive: u32,
    /// Spawn order, used for deterministic eviction ties.
    serial: u64,
}

/// Sequential tracker driven in frame order.
pub struct Tracker {
    cfg: SstConfig,
    models: PowerModels,
    r: Matrix3<f64>,
    f: Matrix6<f64>,
    q: Matrix6<f64>,
    sphere_density: f64,
    tracks: Vec<Track>,
    next_id: u64,
    next_serial: u64,
    /// Assignment of the most recent frame.
    pub last_assignment: Option<Assignment>,
}

impl Tracker {
    /// `dt` is the frame hop in seconds; `half_sphere` halves the search
    /// area used by the new-source and false-detection densities.
    pub fn new(cfg: &SstConfig, dt: f64, half_sphere: bool) -> Self {
        Self {
            models: PowerModels::from_config(cfg),
            r: Matrix3::identity() * cfg.sigma_obs * cfg.sigma_obs,
            f: transition(dt),
            q: process_noise(dt, cfg.sigma_pos, cfg.sigma_vel),
            sphere_density: if half_sphere { 1.0 / (2.0 * PI) } else { 1.0 / (4.0 * PI) },
            cfg: cfg.clone(),
            tracks: Vec::new(),
            next_id: 1,
            next_serial: 0,
            last_assignment: None,
        }
    }

    /// Number of tracks including provisional ones.
    pub fn n_tracks(&self) -> usize {
        self.tracks.len()
    }

    /// Advances one frame and returns the confirmed tracks sorted by id.
    pub fn step(&mut self, observations: &[PotentialDoa]) -> Vec<TrackedSource> {
        for t in &mut self.tracks {
            t.filter.predict_with(&self.f, &self.q);
        }
        let filters: Vec<&KalmanState> = self.tracks.iter().map(|t| &t.filter).collect();
        let a = assign(
            observations,
            &filters,
            &self.models,
            &self.r,
            self.sphere_density,
            self.cfg.assign_floor,
        );

        let lambda = self.cfg.activity_forgetting;
        for (i, t) in self.tracks.iter_mut().enumerate() {
            match a.track_observation(i) {
                Some((o, p)) => {
                    let z = observations[o].direction;
                    if t.filter.update(&z, &self.r).is_ok() {
                        let pos = t.filter.position();
                        if pos.norm() > 1e-9 {
                            let unit = pos.normalize();
                            t.filter.x.fixed_rows_mut::<3>(0).copy_from(&unit);
                        }
                    }
                    t.frames_since_observed = 0;
                    t.consecutive += 1;
                    t.activity = lambda * t.activity + (1.0 - lambda) * p;
                }
                None => {
                    t.frames_since_observed += 1;
                    t.consecutive = 0;
                    t.activity *= lambda;
                }
            }
        }

        for (o, (h, p)) in a.decisions.iter().enumerate() {
            if *h != Hypothesis::New {
                continue;
            }
            let filter = KalmanState::new(
                observations[o].direction,
                Vec3::zeros(),
                self.cfg.init_sigma_pos,
                self.cfg.init_sigma_vel,
            );
            self.tracks.push(Track {
                id: None,
                filter,
                activity: (1.0 - lambda) * p,
                frames_since_observed: 0,
                consecutive: 1,
                serial: self.next_serial,
            });
            self.next_serial += 1;
        }
        self.last_assignment = Some(a);

        let (n_forget, n_prov) = (self.cfg.n_forget, self.cfg.n_provisional_forget);
        self.tracks.retain(|t| {
            let limit = if t.id.is_some() { n_forget } else { n_prov };
            t.frames_since_observed <= limit
        });
        while self.tracks.len() > self.cfg.max_tracks {
            let victim = self
                .tracks
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.activity.total_cmp(&b.activity).then(b.serial.cmp(&a.serial)))
                .map(|(i, _)| i)
                .expect("non-empty");
            self.tracks.remove(victim);
        }
        for t in &mut self.tracks {
            if t.id.is_none() && t.consecutive >= self.cfg.n_confirm {
                t.id = Some(self.next_id);
                self.next_id += 1;
            }
        }
        self.confirmed()
    }

    pub fn confirmed(&self) -> Vec<TrackedSource> {
        let mut out: Vec<TrackedSource> = self
            .tracks
            .iter()
            .filter_map(|t| {
                t.id.map(|id| TrackedSource {
                    id,
                    state: t.filter.x,
                    covariance: t.filter.p,
                    activity: t.activity,
                    frames_since_observed: t.frames_since_observed,
                })
            })
            .collect();
        out.sort_by_key(|t| t.id);
        out
    }
}
