//! Denoising predictors for GPS position series.
//!
//! Three estimators are provided and compared on the same data:
//!
//! - [`kalman`]: a two-state (position, velocity) Kalman filter,
//! - [`wiener`]: a causal FIR Wiener filter designed from sample correlations,
//! - [`mlp`]: a 2-3-1 perceptron trained by backpropagation.
//!
//! [`parfir`] runs any FIR filter through 2- or 3-parallel polyphase block
//! structures that produce the same output as serial convolution, and
//! [`harness`] times the schemes, builds comparison reports and computes the
//! sampling rate each Wiener variant needs to match a real-time scheme.

pub mod config;
pub mod error;
pub mod harness;
pub mod kalman;
pub mod mlp;
pub mod parfir;
pub mod trajectory;
pub mod wiener;

pub use config::Config;
pub use error::{Error, Result};
pub use harness::{
    ComparisonReport, FrequencyRequirement, Parallelism, Scheme, TimingResult, TimingSource,
};
pub use kalman::{KalmanModel, KalmanState};
pub use mlp::{MlpParams, TrainConfig};
pub use parfir::{BlockFirEngine, PolyphaseBank};
pub use trajectory::{ErrorStats, Motion, NoiseSpec, Trajectory};
pub use wiener::{CorrelationSet, FirFilter};
