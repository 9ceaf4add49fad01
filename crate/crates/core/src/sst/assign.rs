use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2};

use super::{Gmm, KalmanState};
use crate::config::SstConfig;
use crate::ssl::PotentialDoa;
use crate::Vec3;

/// Priors and power likelihoods of the assignment hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerModels {
    pub gmm_active: Gmm,
    pub gmm_diffuse: Gmm,
    pub p_false: f64,
    pub p_new: f64,
}

impl PowerModels {
    pub fn from_config(cfg: &SstConfig) -> Self {
        Self {
            gmm_active: Gmm::from(&cfg.gmm_active),
            gmm_diffuse: Gmm::from(&cfg.gmm_diffuse),
            p_false: cfg.p_false,
            p_new: cfg.p_new,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Track(usize),
    New,
    False,
}

/// Per-observation decision with the posterior that supported it.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub decisions: Vec<(Hypothesis, f64)>,
    /// `posteriors[obs]` over `[track_0 .. track_{T-1}, new, false]`.
    pub posteriors: Vec<Vec<f64>>,
}

impl Assignment {
    pub fn track_observation(&self, track: usize) -> Option<(usize, f64)> {
        self.decisions
            .iter()
            .enumerate()
            .find(|(_, (h, _))| *h == Hypothesis::Track(track))
            .map(|(o, (_, p))| (o, *p))
    }
}

/// Density of the observation on the tangent plane of the predicted
/// direction, under the filter's predicted position covariance plus `r`.
pub fn spatial_likelihood(track: &KalmanState, r: &Matrix3<f64>, z: &Vec3) -> f64 {
    let mu = track.position();
    let u = if mu.norm() > 1e-12 { mu.normalize() } else { Vec3::z() };
    let seed = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = u.cross(&seed).normalize();
    let e2 = u.cross(&e1);
    let s = track.innovation_covariance(r);
    let st = Matrix2::new(
        e1.dot(&(s * e1)),
        e1.dot(&(s * e2)),
        e2.dot(&(s * e1)),
        e2.dot(&(s * e2)),
    );
    let y = z - mu;
    let yt = Vector2::new(e1.dot(&y), e2.dot(&y));
    // observations behind the track have no support
    if z.dot(&u) <= 0.0 {
        return 0.0;
    }
    let det = st.determinant();
    let Some(inv) = st.try_inverse() else {
        return 0.0;
    };
    if det <= 0.0 {
        return 0.0;
    }
    (-0.5 * (yt.transpose() * inv * yt)[(0, 0)]).exp() / (2.0 * PI * det.sqrt())
}

/// Posterior over hypotheses per observation, then a greedy best-first
/// one-to-one matching of observations to tracks. Unmatched observations
/// become new sources or false detections; anything whose posterior is
/// below `floor` is a false detection.
pub fn assign(
    observations: &[PotentialDoa],
    tracks: &[&KalmanState],
    models: &PowerModels,
    r: &Matrix3<f64>,
    sphere_density: f64,
    floor: f64,
) -> Assignment {
    let n_t = tracks.len();
    let p_track = 1.0 - models.p_false - models.p_new;
    let posteriors: Vec<Vec<f64>> = observations
        .iter()
        .map(|o| {
            let active = models.gmm_active.pdf(o.power);
            let diffuse = models.gmm_diffuse.pdf(o.power);
            let mut w: Vec<f64> = tracks
                .iter()
                .map(|t| p_track * spatial_likelihood(t, r, &o.direction) * active)
                .collect();
            w.push(models.p_new * sphere_density * active);
            w.push(models.p_false * sphere_density * diffuse);
            let total: f64 = w.iter().sum();
            if total > 0.0 && total.is_finite() {
                w.iter_mut().for_each(|v| *v /= total);
            } else {
                w.iter_mut().for_each(|v| *v = 0.0);
                w[n_t + 1] = 1.0;
            }
            w
        })
        .collect();

    let mut decisions = vec![(Hypothesis::False, 0.0); observations.len()];
    let mut obs_done = vec![false; observations.len()];
    let mut track_done = vec![false; n_t];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (o, post) in posteriors.iter().enumerate() {
            if obs_done[o] {
                continue;
            }
            for t in 0..n_t {
                if track_done[t] || post[t] < floor {
                    continue;
                }
                if best.is_none_or(|(_, _, p)| post[t] > p) {
                    best = Some((o, t, post[t]));
                }
            }
        }
        let Some((o, t, p)) = best else { break };
        decisions[o] = (Hypothesis::Track(t), p);
        obs_done[o] = true;
        track_done[t] = true;
    }
    for (o, post) in posteriors.iter().enumerate() {
        if obs_done[o] {
            continue;
        }
        let (p_new, p_false) = (post[n_t], post[n_t + 1]);
        decisions[o] = if p_new >= floor && p_new > p_false {
            (Hypothesis::New, p_new)
        } else {
            (Hypothesis::False, p_false)
        };
    }
    Assignment { decisions, posteriors }
}
