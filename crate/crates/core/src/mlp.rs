//! 2-3-1 multilayer perceptron trained by per-sample backpropagation.
//!
//! Hidden units use `tanh`, the output unit is linear. Inputs and targets are
//! mapped through an affine [`Normalization`] before reaching the network,
//! and outputs are mapped back.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{error_stats, ErrorStats, Trajectory};

pub const HIDDEN: usize = 3;
pub type Input = [f64; 2];

/// `normalized = (raw − mean) / scale`, per input and for the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_mean: [f64; 2],
    pub input_scale: [f64; 2],
    pub target_mean: f64,
    pub target_scale: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization {
            input_mean: [0.0; 2],
            input_scale: [1.0; 2],
            target_mean: 0.0,
            target_scale: 1.0,
        }
    }

    /// Zero mean, unit variance over the given inputs and targets. Constant
    /// columns keep a unit scale.
    pub fn fit(inputs: &[Input], targets: &[f64]) -> Self {
        let col = |i: usize| inputs.iter().map(move |v| v[i]);
        let (m0, s0) = moments(col(0));
        let (m1, s1) = moments(col(1));
        let (mt, st) = moments(targets.iter().copied());
        Normalization {
            input_mean: [m0, m1],
            input_scale: [s0, s1],
            target_mean: mt,
            target_scale: st,
        }
    }

    fn input(&self, raw: &Input) -> Input {
        [
            (raw[0] - self.input_mean[0]) / self.input_scale[0],
            (raw[1] - self.input_mean[1]) / self.input_scale[1],
        ]
    }

    fn target(&self, raw: f64) -> f64 {
        (raw - self.target_mean) / self.target_scale
    }

    fn output(&self, normalized: f64) -> f64 {
        normalized * self.target_scale + self.target_mean
    }
}

impl Default for Normalization {
    fn default() -> Self {
        Self::identity()
    }
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let scale = if sd > 1e-12 * (1.0 + mean.abs()) { sd } else { 1.0 };
    (mean, scale)
}

/// Network weights. `w_hidden[j]` feeds hidden unit `j`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Weights {
    pub w_hidden: [[f64; 2]; HIDDEN],
    pub b_hidden: [f64; HIDDEN],
    pub w_out: [f64; HIDDEN],
    pub b_out: f64,
}

impl Weights {
    const LEN: usize = HIDDEN * 2 + HIDDEN + HIDDEN + 1;

    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut w = Weights::default();
        for slot in w.as_mut_array() {
            *slot = rng.random_range(-0.5..=0.5);
        }
        w
    }

    /// Flat view in a fixed order: hidden weights row-major, hidden biases,
    /// output weights, output bias.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::LEN);
        for row in &self.w_hidden {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.b_hidden);
        out.extend_from_slice(&self.w_out);
        out.push(self.b_out);
        out
    }

    pub fn from_slice(v: &[f64]) -> Self {
        assert_eq!(v.len(), Self::LEN);
        let mut w = Weights::default();
        for (slot, x) in w.as_mut_array().into_iter().zip(v) {
            *slot = *x;
        }
        w
    }

    fn as_mut_array(&mut self) -> [&mut f64; Self::LEN] {
        let [[a, b], [c, d], [e, f]] = &mut self.w_hidden;
        let [g, h, i] = &mut self.b_hidden;
        let [j, k, l] = &mut self.w_out;
        [a, b, c, d, e, f, g, h, i, j, k, l, &mut self.b_out]
    }

    fn hidden(&self, x: &Input) -> [f64; HIDDEN] {
        std::array::from_fn(|j| {
            (self.w_hidden[j][0] * x[0] + self.w_hidden[j][1] * x[1] + self.b_hidden[j]).tanh()
        })
    }

    /// Network output in normalized units.
    pub fn forward(&self, x: &Input) -> f64 {
        let a = self.hidden(x);
        self.w_out.iter().zip(&a).map(|(w, a)| w * a).sum::<f64>() + self.b_out
    }

    fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub weights: Weights,
    pub normalization: Normalization,
    /// Mean squared error over the training set after the last epoch, in
    /// raw target units.
    pub train_mse: Option<f64>,
}

impl MlpParams {
    pub fn new(weights: Weights, normalization: Normalization) -> Self {
        MlpParams {
            weights,
            normalization,
            train_mse: None,
        }
    }

    pub fn predict(&self, input: &Input) -> f64 {
        forward(self, input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub normalization: Normalization,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::param("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 0.01,
            seed: 1,
            normalization: Normalization::identity(),
        }
    }
}

/// Prediction in raw units.
pub fn forward(params: &MlpParams, input: &Input) -> f64 {
    let norm = &params.normalization;
    norm.output(params.weights.forward(&norm.input(input)))
}

/// Loss of one sample in normalized units: `½ (net(x̃) − ỹ)²`.
pub fn loss(params: &MlpParams, input: &Input, target: f64) -> f64 {
    let norm = &params.normalization;
    let e = params.weights.forward(&norm.input(input)) - norm.target(target);
    0.5 * e * e
}

/// Analytic gradient of [`loss`] with respect to every weight.
pub fn grad(params: &MlpParams, input: &Input, target: f64) -> Weights {
    let norm = &params.normalization;
    let x = norm.input(input);
    let w = &params.weights;
    let a = w.hidden(&x);
    let y = w.w_out.iter().zip(&a).map(|(w, a)| w * a).sum::<f64>() + w.b_out;
    let delta_out = y - norm.target(target);

    let mut g = Weights {
        b_out: delta_out,
        ..Weights::default()
    };
    for j in 0..HIDDEN {
        g.w_out[j] = delta_out * a[j];
        let delta_hidden = delta_out * w.w_out[j] * (1.0 - a[j] * a[j]);
        g.b_hidden[j] = delta_hidden;
        g.w_hidden[j] = [delta_hidden * x[0], delta_hidden * x[1]];
    }
    g
}

/// One gradient-descent step on a single sample.
pub fn sgd_step(params: &mut MlpParams, input: &Input, target: f64, learning_rate: f64) {
    let g = grad(params, input, target).to_vec();
    let mut w = params.weights.to_vec();
    for (wi, gi) in w.iter_mut().zip(&g) {
        *wi -= learning_rate * gi;
    }
    params.weights = Weights::from_slice(&w);
}

/// Per-sample SGD over the dataset in order, `epochs` times.
pub fn train(dataset: &[(Input, f64)], config: &TrainConfig) -> Result<MlpParams> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = MlpParams::new(Weights::random(&mut rng), config.normalization);

    for epoch in 1..=config.epochs {
        let mut total = 0.0;
        for (input, target) in dataset {
            total += loss(&params, input, *target);
            sgd_step(&mut params, input, *target, config.learning_rate);
        }
        if !total.is_finite() || !params.weights.is_finite() {
            return Err(Error::Divergence { epoch });
        }
    }

    let mse = dataset
        .iter()
        .map(|(input, target)| (forward(&params, input) - target).powi(2))
        .sum::<f64>()
        / dataset.len() as f64;
    if !mse.is_finite() {
        return Err(Error::Divergence {
            epoch: config.epochs,
        });
    }
    params.train_mse = Some(mse);
    Ok(params)
}

/// Feature vector for sample `k`: the previous and current measurement.
pub fn features(measured: &[f64], k: usize) -> Input {
    [measured[k - 1], measured[k]]
}

/// Index of the first evaluation sample.
pub fn split_point(n: usize) -> usize {
    n / 2
}

/// Training pairs from the first half of a trajectory.
pub fn training_set(traj: &Trajectory) -> Vec<(Input, f64)> {
    let half = split_point(traj.len());
    (1..half)
        .map(|k| (features(traj.measured(), k), traj.truth()[k]))
        .collect()
}

/// Trains on the first half, with normalization fitted to that half.
pub fn fit_first_half(traj: &Trajectory, config: &TrainConfig) -> Result<MlpParams> {
    if traj.len() < 4 {
        return Err(Error::param(format!(
            "a train/evaluate split needs at least 4 samples, got {}",
            traj.len()
        )));
    }
    let data = training_set(traj);
    let inputs: Vec<Input> = data.iter().map(|(i, _)| *i).collect();
    let targets: Vec<f64> = data.iter().map(|(_, t)| *t).collect();
    let config = TrainConfig {
        normalization: Normalization::fit(&inputs, &targets),
        ..*config
    };
    train(&data, &config)
}

/// Predictions for the second half. Only measurements are read.
pub fn predict_second_half(params: &MlpParams, measured: &[f64]) -> Vec<f64> {
    (split_point(measured.len())..measured.len())
        .map(|k| forward(params, &features(measured, k)))
        .collect()
}

/// Trains on the first half and scores the second half against truth.
pub fn evaluate_split(traj: &Trajectory, config: &TrainConfig) -> Result<(Vec<f64>, ErrorStats)> {
    let params = fit_first_half(traj, config)?;
    let estimates = predict_second_half(&params, traj.measured());
    let half = split_point(traj.len());
    let stats = error_stats(&estimates, &traj.truth()[half..])?;
    Ok((estimates, stats))
}
