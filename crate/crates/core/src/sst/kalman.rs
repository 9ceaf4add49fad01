use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector6};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KalmanError {
    #[error("innovation covariance is not positive definite")]
    Degenerate,
}

/// Constant-velocity filter state: position (3) then velocity (3).
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x: Vector6<f64>,
    pub p: Matrix6<f64>,
}

pub fn transition(dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

/// Process noise with per-sqrt-second densities scaled by `dt`.
pub fn process_noise(dt: f64, sigma_pos: f64, sigma_vel: f64) -> Matrix6<f64> {
    let mut q = Matrix6::zeros();
    for i in 0..3 {
        q[(i, i)] = sigma_pos * sigma_pos * dt;
        q[(i + 3, i + 3)] = sigma_vel * sigma_vel * dt;
    }
    q
}

pub fn observation_matrix() -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    h
}

impl KalmanState {
    pub fn new(position: Vec3, velocity: Vec3, sigma_pos: f64, sigma_vel: f64) -> Self {
        let mut x = Vector6::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&position);
        x.fixed_rows_mut::<3>(3).copy_from(&velocity);
        let mut p = Matrix6::zeros();
        for i in 0..3 {
            p[(i, i)] = sigma_pos * sigma_pos;
            p[(i + 3, i + 3)] = sigma_vel * sigma_vel;
        }
        Self { x, p }
    }

    pub fn position(&self) -> Vec3 {
        self.x.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.x.fixed_rows::<3>(3).into_owned()
    }

    pub fn position_covariance(&self) -> Matrix3<f64> {
        self.p.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn predict_with(&mut self, f: &Matrix6<f64>, q: &Matrix6<f64>) {
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + q;
        symmetrize(&mut self.p);
    }

    pub fn predict(&mut self, dt: f64, sigma_pos: f64, sigma_vel: f64) {
        self.predict_with(&transition(dt), &process_noise(dt, sigma_pos, sigma_vel));
    }

    /// Innovation covariance `H P Hᵀ + R`.
    pub fn innovation_covariance(&self, r: &Matrix3<f64>) -> Matrix3<f64> {
        self.position_covariance() + r
    }

    /// Linear update with `H = [I 0]` and a Joseph-form covariance update.
    pub fn update(&mut self, z: &Vec3, r: &Matrix3<f64>) -> Result<(), KalmanError> {
        let h = observation_matrix();
        let s = self.innovation_covariance(r);
        let s_inv = s.cholesky().ok_or(KalmanError::Degenerate)?.inverse();
        let k = self.p * h.transpose() * s_inv;
        let y = z - self.position();
        self.x += k * y;
        let a = Matrix6::identity() - k * h;
        self.p = a * self.p * a.transpose() + k * r * k.transpose();
        symmetrize(&mut self.p);
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.p.symmetric_eigenvalues().min()
    }
}

fn symmetrize(p: &mut Matrix6<f64>) {
    *p = (*p + p.transpose()) * 0.5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_without_noise_or_velocity_is_identity() {
        let mut k = KalmanState::new(Vec3::new(0.3, 0.4, 0.5), Vec3::zeros(), 0.1, 0.2);
        let before = k.clone();
        k.predict(0.016, 0.0, 0.0);
        assert_eq!(k.position(), before.position());
        let mut k0 = KalmanState::new(Vec3::x(), Vec3::zeros(), 0.1, 0.0);
        let p0 = k0.p;
        k0.predict(0.5, 0.0, 0.0);
        assert_eq!(k0.p, p0);
    }

    #[test]
    fn predict_shifts_by_velocity() {
        let v = Vec3::new(1.0, -2.0, 0.5);
        let mut k = KalmanState::new(Vec3::zeros(), v, 0.1, 0.1);
        k.predict(0.25, 0.02, 0.2);
        assert!((k.position() - v * 0.25).norm() < 1e-15);
    }

    #[test]
    fn zero_innovation_shrinks_covariance() {
        let mut k = KalmanState::new(Vec3::x(), Vec3::zeros(), 0.1, 0.5);
        k.predict(0.016, 0.02, 0.2);
        let (x, tr) = (k.x, k.p.trace());
        let z = k.position();
        k.update(&z, &(Matrix3::identity() * 0.0025)).unwrap();
        assert!((k.x - x).norm() < 1e-15);
        assert!(k.p.trace() < tr);
    }

    #[test]
    fn uninformative_measurement() {
        let mut k = KalmanState::new(Vec3::x(), Vec3::zeros(), 0.1, 0.5);
        let x = k.x;
        k.update(&Vec3::y(), &(Matrix3::identity() * 1e12)).unwrap();
        assert!((k.x - x).norm() < 1e-12);
    }

    #[test]
    fn degenerate_innovation() {
        let mut k = KalmanState::new(Vec3::x(), Vec3::zeros(), 0.0, 0.0);
        assert_eq!(k.update(&Vec3::y(), &Matrix3::zeros()), Err(KalmanError::Degenerate));
    }

    /// Noiseless constant-velocity track: the filter's velocity converges to
    /// the least-squares slope of the observations.
    #[test]
    fn constant_velocity_matches_regression() {
        let dt = 0.016;
        let p0 = Vec3::new(1.0, 0.0, 0.0);
        let v = Vec3::new(-0.1, 0.3, 0.05);
        let mut k = KalmanState::new(p0, Vec3::zeros(), 0.1, 1.0);
        let r = Matrix3::identity() * 1e-4;
        let mut obs = Vec::new();
        for n in 1..=100 {
            let t = n as f64 * dt;
            let z = p0 + v * t;
            obs.push((t, z));
            k.predict(dt, 0.0, 0.0);
            k.update(&z, &r).unwrap();
        }
        let (tm, zm) = obs.iter().fold((0.0, Vec3::zeros()), |a, (t, z)| (a.0 + t, a.1 + z));
        let (tm, zm) = (tm / 100.0, zm / 100.0);
        let mut num = Vec3::zeros();
        let mut den = 0.0;
        for (t, z) in &obs {
            num += (z - zm) * (t - tm);
            den += (t - tm) * (t - tm);
        }
        let slope = num / den;
        assert!((k.velocity() - slope).norm() < 1e-3, "{:?} vs {:?}", k.velocity(), slope);
        assert!((k.position() - obs.last().unwrap().1).norm() < 1e-3);
    }
}
