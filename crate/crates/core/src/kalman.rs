//! Two-state (position, velocity) Kalman filter with a position-only
//! measurement.
//!
//! The filter alternates a time update (`predict`) and a measurement update
//! (`update`). Process noise enters as `q * I` and the initial covariance is
//! also `q * I`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Process-noise scale used for GPS position, 30 m squared.
pub const DEFAULT_Q: f64 = 900.0;

const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanModel {
    /// State transition `[[1, dt], [0, 1]]`.
    pub a: Mat2,
    /// Measurement row `[1, 0]`.
    pub h: Vec2,
    pub q: f64,
    pub r: f64,
    pub dt: f64,
}

impl KalmanModel {
    pub fn new(dt: f64, q: f64, r: f64) -> Result<Self> {
        let model = KalmanModel {
            a: [[1.0, dt], [0.0, 1.0]],
            h: [1.0, 0.0],
            q,
            r,
            dt,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::param(format!("Q must be positive, got {}", self.q)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::param(format!("R must be positive, got {}", self.r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    pub x_hat: Vec2,
    pub p: Mat2,
    pub k_gain: Vec2,
    pub step: usize,
}

impl KalmanState {
    /// Position from the mean of the first two samples, velocity from their
    /// difference.
    pub fn init(z1: f64, z2: f64, model: &KalmanModel) -> Result<Self> {
        model.validate()?;
        Ok(KalmanState {
            x_hat: [(z1 + z2) / 2.0, (z2 - z1) / model.dt],
            p: scale(&IDENTITY, model.q),
            k_gain: [0.0, 0.0],
            step: 1,
        })
    }

    pub fn position(&self) -> f64 {
        self.x_hat[0]
    }

    /// Eigenvalues of the (symmetric) covariance, ascending.
    pub fn covariance_eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [_, d]] = self.p;
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mean - radius, mean + radius]
    }
}

/// Time update: `x⁻ = A x`, `P⁻ = A P Aᵀ + Q I`.
pub fn predict(state: &KalmanState, model: &KalmanModel) -> KalmanState {
    let a = &model.a;
    let x_hat = mat_vec(a, &state.x_hat);
    let apat = mat_mul(&mat_mul(a, &state.p), &transpose(a));
    let p = symmetrize(&add(&apat, &scale(&IDENTITY, model.q)));
    KalmanState {
        x_hat,
        p,
        k_gain: state.k_gain,
        step: state.step + 1,
    }
}

/// Measurement update with scalar observation `z`.
pub fn update(state: &KalmanState, z: f64, model: &KalmanModel) -> Result<KalmanState> {
    let h = &model.h;
    let ph = mat_vec(&state.p, h);
    let innovation_var = dot(h, &ph) + model.r;
    if !(innovation_var > 0.0) || !innovation_var.is_finite() {
        return Err(Error::Degenerate(format!(
            "innovation variance H P Hᵀ + R = {innovation_var} at step {}",
            state.step
        )));
    }
    let k_gain = [ph[0] / innovation_var, ph[1] / innovation_var];
    let residual = z - dot(h, &state.x_hat);
    let x_hat = [
        state.x_hat[0] + k_gain[0] * residual,
        state.x_hat[1] + k_gain[1] * residual,
    ];
    let kh = [
        [k_gain[0] * h[0], k_gain[0] * h[1]],
        [k_gain[1] * h[0], k_gain[1] * h[1]],
    ];
    let p = symmetrize(&mat_mul(&sub(&IDENTITY, &kh), &state.p));
    if !k_gain.iter().all(|g| g.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite gain at step {}", state.step)));
    }
    Ok(KalmanState {
        x_hat,
        p,
        k_gain,
        step: state.step,
    })
}

/// Filters a whole trajectory. The first two outputs are the initial
/// position estimate; every later output is the posterior position.
pub fn run(traj: &Trajectory, model: &KalmanModel) -> Result<(Vec<f64>, KalmanState)> {
    let z = traj.measured();
    let mut state = KalmanState::init(z[0], z[1], model)?;
    let mut estimates = Vec::with_capacity(z.len());
    estimates.push(state.position());
    estimates.push(state.position());
    for &zk in &z[2..] {
        state = update(&predict(&state, model), zk, model)?;
        estimates.push(state.position());
    }
    Ok((estimates, state))
}

/// Runs the filter and records the gain after every measurement update.
pub fn gain_history(traj: &Trajectory, model: &KalmanModel) -> Result<Vec<Vec2>> {
    let z = traj.measured();
    let mut state = KalmanState::init(z[0], z[1], model)?;
    let mut gains = Vec::with_capacity(z.len().saturating_sub(2));
    for &zk in &z[2..] {
        state = update(&predict(&state, model), zk, model)?;
        gains.push(state.k_gain);
    }
    Ok(gains)
}

fn mat_vec(m: &Mat2, v: &Vec2) -> Vec2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

fn sub(a: &Mat2, b: &Mat2) -> Mat2 {
    add(a, &scale(b, -1.0))
}

fn scale(m: &Mat2, s: f64) -> Mat2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

fn symmetrize(m: &Mat2) -> Mat2 {
    let off = 0.5 * (m[0][1] + m[1][0]);
    [[m[0][0], off], [off, m[1][1]]]
}

fn dot(a: &Vec2, b: &Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
