use nalgebra::DMatrix;

use super::SteeringTarget;
use crate::audio_io::SpectralFrame;
use crate::Complex64;

type CMatrix = DMatrix<Complex64>;

/// Output-to-input power ratio treated as divergence.
pub const DIVERGENCE_RATIO: f64 = 1e3;

/// Per-bin demixing matrices (targets × mics) for geometric source
/// separation.
#[derive(Debug, Clone)]
pub struct DemixState {
    pub ids: Vec<u64>,
    pub step_size: f64,
    pub constraint_weight: f64,
    /// `w[k]`: demixing matrix at bin `k`.
    pub w: Vec<CMatrix>,
    /// `a[k]`: steering matrix (mics × targets) at bin `k`.
    pub a: Vec<CMatrix>,
    /// Smoothed input power per bin, for step normalization.
    input_power: Vec<f64>,
    pub resets: u64,
    frame_size: usize,
    n_mics: usize,
}

fn steering_matrix(targets: &[SteeringTarget], n_mics: usize, k: usize, frame_size: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n_mics, targets.len());
    for (n, t) in targets.iter().enumerate() {
        for (m, v) in t.steering(n_mics, k, frame_size).into_iter().enumerate() {
            a[(m, n)] = v;
        }
    }
    a
}

/// Regularized pseudo-inverse `(AᴴA + δI)⁻¹Aᴴ`; `δ = 0` for one target so
/// that the result is exactly the delay-and-sum solution.
pub fn steering_solution(a: &CMatrix) -> CMatrix {
    let n = a.ncols();
    let ah = a.adjoint();
    let mut g = &ah * a;
    if n > 1 {
        let delta = 1e-3 * a.nrows() as f64;
        for i in 0..n {
            g[(i, i)] += Complex64::new(delta, 0.0);
        }
    }
    match g.try_inverse() {
        Some(inv) => inv * ah,
        None => ah / Complex64::new(a.nrows() as f64, 0.0),
    }
}

impl DemixState {
    pub fn new(targets: &[SteeringTarget], n_mics: usize, frame_size: usize, step_size: f64, constraint_weight: f64) -> Self {
        let n_bins = frame_size / 2 + 1;
        let a: Vec<CMatrix> = (0..n_bins).map(|k| steering_matrix(targets, n_mics, k, frame_size)).collect();
        Self {
            ids: targets.iter().map(|t| t.track_id).collect(),
            step_size,
            constraint_weight,
            w: a.iter().map(steering_solution).collect(),
            a,
            input_power: vec![0.0; n_bins],
            resets: 0,
            frame_size,
            n_mics,
        }
    }

    pub fn n_targets(&self) -> usize {
        self.ids.len()
    }

    /// Follows updated target directions. A changed target set restarts
    /// from the steering solution; otherwise only the constraint moves.
    pub fn retarget(&mut self, targets: &[SteeringTarget]) {
        let ids: Vec<u64> = targets.iter().map(|t| t.track_id).collect();
        if ids != self.ids {
            *self = Self::new(targets, self.n_mics, self.frame_size, self.step_size, self.constraint_weight);
            return;
        }
        for (k, a) in self.a.iter_mut().enumerate() {
            *a = steering_matrix(targets, self.n_mics, k, self.frame_size);
        }
    }

    pub fn reset(&mut self) {
        self.w = self.a.iter().map(steering_solution).collect();
        self.input_power.iter_mut().for_each(|p| *p = 0.0);
        self.resets += 1;
    }

    /// `Σ_k ‖W(k)A(k) − I‖²_F`.
    pub fn constraint_residual(&self) -> f64 {
        let n = self.n_targets();
        self.w
            .iter()
            .zip(&self.a)
            .map(|(w, a)| (w * a - CMatrix::identity(n, n)).norm_squared())
            .sum()
    }

    /// Weights of one target as `[bin][mic]`.
    pub fn weights_of(&self, target: usize) -> Vec<Vec<Complex64>> {
        self.w.iter().map(|w| w.row(target).iter().copied().collect()).collect()
    }
}

/// Demixes one frame with the current matrices, then adapts them: a
/// normalized gradient step on the off-diagonal output correlation plus
/// the geometric constraint `‖WA − I‖²`. Returns one spectrum per target.
pub fn gss_step(frame: &SpectralFrame, state: &mut DemixState) -> Vec<Vec<Complex64>> {
    let n = state.n_targets();
    let n_bins = frame.n_bins();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n_bins]; n];
    let (mut p_in, mut p_out) = (0.0, 0.0);
    let identity = CMatrix::identity(n, n);
    for k in 0..n_bins {
        let x = CMatrix::from_iterator(frame.n_channels(), 1, frame.bins.iter().map(|b| b[k]));
        let w = &state.w[k];
        let y = w * &x;
        for t in 0..n {
            out[t][k] = y[(t, 0)];
        }
        let xx = x.norm_squared();
        p_in += xx;
        p_out += y.norm_squared();
        if state.step_size == 0.0 {
            continue;
        }
        let pw = &mut state.input_power[k];
        *pw = if *pw == 0.0 { xx } else { 0.9 * *pw + 0.1 * xx };
        let alpha = 1.0 / (*pw * *pw + 1e-20);
        let mut e = &y * y.adjoint();
        for i in 0..n {
            e[(i, i)] = Complex64::new(0.0, 0.0);
        }
        let grad_sep = (e * &y * x.adjoint()) * Complex64::new(4.0 * alpha, 0.0);
        let a = &state.a[k];
        let grad_geo = ((w * a - &identity) * a.adjoint()) * Complex64::new(2.0, 0.0);
        let update = grad_sep + grad_geo * Complex64::new(state.constraint_weight, 0.0);
        state.w[k] -= update * Complex64::new(state.step_size, 0.0);
    }
    if p_out > DIVERGENCE_RATIO * p_in || !p_out.is_finite() || state.w.iter().any(|w| w.iter().any(|v| !v.is_finite())) {
        state.reset();
    }
    out
}
