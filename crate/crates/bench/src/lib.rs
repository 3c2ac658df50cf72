//! Shared fixtures for the benchmarks.

use gpsfilt::kalman::{self, KalmanModel};
use gpsfilt::mlp::{self, MlpParams, TrainConfig};
use gpsfilt::trajectory::{self, Motion, NoiseSpec, Trajectory};
use gpsfilt::wiener::{self, FirFilter};

/// Default static trajectory with the default noise.
pub fn trajectory() -> Trajectory {
    trajectory::generate(
        trajectory::DEFAULT_LEN,
        trajectory::DEFAULT_DT,
        Motion::default(),
        &NoiseSpec::default(),
    )
    .expect("default trajectory")
}

/// Wiener filter of length `m` designed on `traj`.
pub fn filter(traj: &Trajectory, m: usize) -> FirFilter {
    wiener::design_from_trajectory(traj, m).expect("design")
}

/// Kalman model with the default process noise and `R = σ²`.
pub fn kalman_model(traj: &Trajectory) -> KalmanModel {
    let sigma = NoiseSpec::default().white_sigma;
    KalmanModel::new(traj.dt(), kalman::DEFAULT_Q, sigma * sigma).expect("model")
}

/// Network trained on the first half of `traj`.
pub fn trained_mlp(traj: &Trajectory) -> MlpParams {
    mlp::fit_first_half(traj, &TrainConfig::default()).expect("training")
}
