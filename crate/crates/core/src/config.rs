//! `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so typos surface early.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::DEFAULT_Q;
use crate::mlp::TrainConfig;
use crate::trajectory::{NoiseSpec, DEFAULT_DT, DEFAULT_LEN};
use crate::wiener::FULL_LENGTH;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub n: usize,
    pub dt: f64,
    pub noise: NoiseSpec,
    pub kalman_q: f64,
    /// `None` derives R from the noise model (or falls back to Q).
    pub kalman_r: Option<f64>,
    pub wiener_length: usize,
    pub wiener_skip_transient: bool,
    pub mlp: TrainConfig,
    pub repetitions: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n: DEFAULT_LEN,
            dt: DEFAULT_DT,
            noise: NoiseSpec::default(),
            kalman_q: DEFAULT_Q,
            kalman_r: None,
            wiener_length: FULL_LENGTH,
            wiener_skip_transient: false,
            mlp: TrainConfig::default(),
            repetitions: 50,
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx as u64 + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: idx as u64 + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "noise.white_sigma" => self.noise.white_sigma = num(key, value)?,
            "noise.ar_coeff" => self.noise.ar_coeff = num(key, value)?,
            "noise.bias" => self.noise.bias = num(key, value)?,
            "noise.seed" | "seed" => self.noise.seed = num(key, value)?,
            "kalman.q" => self.kalman_q = num(key, value)?,
            "kalman.r" => {
                self.kalman_r = match value {
                    "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "wiener.length" => self.wiener_length = num(key, value)?,
            "wiener.skip_transient" => self.wiener_skip_transient = num(key, value)?,
            "mlp.epochs" => self.mlp.epochs = num(key, value)?,
            "mlp.lr" => self.mlp.learning_rate = num(key, value)?,
            "mlp.seed" => self.mlp.seed = num(key, value)?,
            "bench.repetitions" => self.repetitions = num(key, value)?,
            _ => return Err(Error::param(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Measurement variance for the Kalman filter: the configured value, else
    /// the white-noise variance of the noise model, else Q.
    pub fn kalman_r(&self) -> f64 {
        match self.kalman_r {
            Some(r) => r,
            None if self.noise.white_sigma > 0.0 => self.noise.white_sigma.powi(2),
            None => self.kalman_q,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::param(format!("`{key}`: cannot parse `{value}`: {e}")))
}
