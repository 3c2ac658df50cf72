//! Position series: synthetic generation, CSV ingestion and error statistics.
//!
//! A [`Trajectory`] holds one coordinate axis. The true position and the noisy
//! measurement are paired sample by sample at a fixed sampling period.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of samples per series used throughout the comparison.
pub const DEFAULT_LEN: usize = 180;
/// 20 Hz receiver output.
pub const DEFAULT_DT: f64 = 0.05;

const DT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    truth: Vec<f64>,
    measured: Vec<f64>,
    dt: f64,
    axis_label: String,
}

impl Trajectory {
    pub fn new(truth: Vec<f64>, measured: Vec<f64>, dt: f64) -> Result<Self> {
        if truth.len() != measured.len() {
            return Err(Error::param(format!(
                "truth has {} samples but measured has {}",
                truth.len(),
                measured.len()
            )));
        }
        if truth.len() < 2 {
            return Err(Error::param("a trajectory needs at least 2 samples"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param(format!("sampling period must be positive, got {dt}")));
        }
        Ok(Trajectory {
            truth,
            measured,
            dt,
            axis_label: "z".to_string(),
        })
    }

    pub fn with_axis_label(mut self, label: impl Into<String>) -> Self {
        self.axis_label = label.into();
        self
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn measured(&self) -> &[f64] {
        &self.measured
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn axis_label(&self) -> &str {
        &self.axis_label
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    /// Error statistics of the raw measurements.
    pub fn raw_error(&self) -> ErrorStats {
        // lengths are equal and non-zero by construction
        error_stats(&self.measured, &self.truth).expect("trajectory invariant")
    }

    /// Writes `t,truth,measured` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,truth,measured")?;
        for (k, (s, x)) in self.truth.iter().zip(&self.measured).enumerate() {
            writeln!(out, "{},{},{}", k as f64 * self.dt, s, x)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// AR(1) measurement error with a constant bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub white_sigma: f64,
    pub ar_coeff: f64,
    pub bias: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec {
            white_sigma: 0.0,
            ar_coeff: 0.0,
            bias: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        NoiseSpec { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.white_sigma >= 0.0 && self.white_sigma.is_finite()) {
            return Err(Error::param(format!(
                "white_sigma must be non-negative, got {}",
                self.white_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.ar_coeff) {
            return Err(Error::param(format!(
                "ar_coeff must lie in [0, 1), got {}",
                self.ar_coeff
            )));
        }
        if !self.bias.is_finite() {
            return Err(Error::param("bias must be finite"));
        }
        Ok(())
    }

    /// Stationary standard deviation of the AR(1) component.
    pub fn stationary_sigma(&self) -> f64 {
        self.white_sigma / (1.0 - self.ar_coeff * self.ar_coeff).sqrt()
    }
}

impl Default for NoiseSpec {
    /// Calibrated so the raw absolute error of a 180-sample run averages
    /// roughly 12 m.
    fn default() -> Self {
        NoiseSpec {
            white_sigma: 9.0,
            ar_coeff: 0.8,
            bias: 0.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Motion {
    Static { position: f64 },
    ConstantVelocity { start: f64, velocity: f64 },
}

impl Motion {
    pub fn position(&self, t: f64) -> f64 {
        match *self {
            Motion::Static { position } => position,
            Motion::ConstantVelocity { start, velocity } => start + velocity * t,
        }
    }
}

impl Default for Motion {
    fn default() -> Self {
        Motion::Static { position: 100.0 }
    }
}

/// Synthesizes `n` samples of `motion` observed through `noise`.
pub fn generate(n: usize, dt: f64, motion: Motion, noise: &NoiseSpec) -> Result<Trajectory> {
    if n < 2 {
        return Err(Error::param(format!("n must be at least 2, got {n}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!("sampling period must be positive, got {dt}")));
    }
    noise.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut ar = 0.0;
    let mut truth = Vec::with_capacity(n);
    let mut measured = Vec::with_capacity(n);
    for k in 0..n {
        let w: f64 = rng.sample(StandardNormal);
        ar = noise.ar_coeff * ar + noise.white_sigma * w;
        let s = motion.position(k as f64 * dt);
        truth.push(s);
        measured.push(s + ar + noise.bias);
    }
    Trajectory::new(truth, measured, dt)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    read_csv(File::open(path)?)
}

/// Parses a `t,truth,measured` table. The sampling period comes from the
/// first two timestamps and every later step must match it.
pub fn read_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["t", "truth", "measured"] {
        return Err(Error::Format(format!(
            "expected header `t,truth,measured`, found `{}`",
            names.join(",")
        )));
    }

    let mut times = Vec::new();
    let mut truth = Vec::new();
    let mut measured = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let mut fields = [0.0; 3];
        for (slot, raw) in fields.iter_mut().zip(record.iter()) {
            *slot = raw.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("`{raw}`: {e}"),
            })?;
        }
        times.push(fields[0]);
        truth.push(fields[1]);
        measured.push(fields[2]);
    }

    match times.len() {
        0 => return Err(Error::NoSamples),
        1 => return Err(Error::Format("a single sample has no sampling period".into())),
        _ => {}
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::Format(format!("timestamps must increase, first step is {dt}")));
    }
    for (k, pair) in times.windows(2).enumerate().skip(1) {
        let step = pair[1] - pair[0];
        if (step - dt).abs() > DT_REL_TOL * dt {
            return Err(Error::Format(format!(
                "non-uniform sampling: step {} is {step}, expected {dt}",
                k + 1
            )));
        }
    }
    Trajectory::new(truth, measured, dt)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err
        .position()
        .map(|p| p.line())
        .unwrap_or(fallback_line);
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Absolute-error summary. `variance` is the population variance of the
/// absolute errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean_abs: f64,
    pub variance: f64,
    pub count: usize,
}

pub fn error_stats(estimate: &[f64], truth: &[f64]) -> Result<ErrorStats> {
    if estimate.len() != truth.len() {
        return Err(Error::param(format!(
            "estimate has {} samples but truth has {}",
            estimate.len(),
            truth.len()
        )));
    }
    if estimate.is_empty() {
        return Err(Error::NoSamples);
    }
    let n = estimate.len() as f64;
    let abs: Vec<f64> = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).abs())
        .collect();
    let mean_abs = abs.iter().sum::<f64>() / n;
    let variance = abs.iter().map(|a| (a - mean_abs).powi(2)).sum::<f64>() / n;
    Ok(ErrorStats {
        mean_abs,
        variance,
        count: estimate.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_noise_static_is_identity() {
        let t = generate(4, 0.05, Motion::Static { position: 100.0 }, &NoiseSpec::noiseless())
            .unwrap();
        assert_eq!(t.measured(), &[100.0; 4]);
        assert_eq!(t.truth(), &[100.0; 4]);
    }

    #[test]
    fn pure_bias() {
        let noise = NoiseSpec {
            bias: 5.0,
            ..NoiseSpec::noiseless()
        };
        let t = generate(2, 0.05, Motion::Static { position: 0.0 }, &noise).unwrap();
        assert_eq!(t.measured(), &[5.0, 5.0]);
    }

    #[test]
    fn default_noise_raw_error_scale() {
        let t = generate(DEFAULT_LEN, DEFAULT_DT, Motion::default(), &NoiseSpec::default())
            .unwrap();
        let raw = t.raw_error();
        assert!((8.0..=16.0).contains(&raw.mean_abs), "{raw:?}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let noise = NoiseSpec::noiseless();
        assert!(matches!(
            generate(1, 0.05, Motion::default(), &noise),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            generate(10, 0.0, Motion::default(), &noise),
            Err(Error::Parameter(_))
        ));
        let bad = NoiseSpec {
            ar_coeff: 1.0,
            ..noise
        };
        assert!(generate(10, 0.05, Motion::default(), &bad).is_err());
        let bad = NoiseSpec {
            white_sigma: -1.0,
            ..noise
        };
        assert!(generate(10, 0.05, Motion::default(), &bad).is_err());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let noise = NoiseSpec::default().with_seed(42);
        let a = generate(500, 0.05, Motion::default(), &noise).unwrap();
        let b = generate(500, 0.05, Motion::default(), &noise).unwrap();
        assert_eq!(a, b);
        let c = generate(500, 0.05, Motion::default(), &noise.with_seed(43)).unwrap();
        assert_ne!(a.measured(), c.measured());
    }

    #[test]
    fn csv_basic() {
        let t = read_csv("t,truth,measured\n0.00,10,12\n0.05,10,9\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_relative_eq!(t.dt(), 0.05);
        assert_eq!(t.truth(), &[10.0, 10.0]);
        assert_eq!(t.measured(), &[12.0, 9.0]);
    }

    #[test]
    fn csv_no_samples() {
        let err = read_csv("t,truth,measured\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NoSamples));
        assert_eq!(err.to_string(), "no samples");
    }

    #[test]
    fn csv_non_uniform() {
        let err = read_csv("t,truth,measured\n0,1,1\n0.05,1,1\n0.11,1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn csv_bad_row_reports_line() {
        let err = read_csv("t,truth,measured\n0,1,1\n0.05,x,1\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let err = read_csv("t,truth,measured\n0,1,1\n0.05,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn csv_bad_header() {
        let err = read_csv("time,a,b\n0,1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn stats_examples() {
        let s = [1.0, 2.0, 3.0];
        let e = error_stats(&s, &s).unwrap();
        assert_eq!((e.mean_abs, e.variance, e.count), (0.0, 0.0, 3));

        let shifted: Vec<f64> = s.iter().map(|v| v + 2.0).collect();
        let e = error_stats(&shifted, &s).unwrap();
        assert_relative_eq!(e.mean_abs, 2.0);
        assert_relative_eq!(e.variance, 0.0);

        // |errors| = {1, 3}
        let e = error_stats(&[1.0, -3.0], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(e.mean_abs, 2.0);
        assert_relative_eq!(e.variance, 1.0);

        assert!(matches!(error_stats(&[1.0], &[1.0, 2.0]), Err(Error::Parameter(_))));
        assert!(error_stats(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn stats_scale_covariantly(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..64),
            c in -10.0f64..10.0,
        ) {
            let (est, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = error_stats(&est, &truth).unwrap();
            let est_c: Vec<f64> = est.iter().map(|v| v * c).collect();
            let truth_c: Vec<f64> = truth.iter().map(|v| v * c).collect();
            let scaled = error_stats(&est_c, &truth_c).unwrap();
            prop_assert!((scaled.mean_abs - c.abs() * base.mean_abs).abs()
                <= 1e-9 * (1.0 + scaled.mean_abs));
            prop_assert!((scaled.variance - c * c * base.variance).abs()
                <= 1e-9 * (1.0 + scaled.variance));
        }

        #[test]
        fn csv_round_trip(seed in any::<u64>(), n in 2usize..300, dt in 0.001f64..2.0) {
            let motion = Motion::ConstantVelocity { start: -50.0, velocity: 3.5 };
            let t = generate(n, dt, motion, &NoiseSpec::default().with_seed(seed)).unwrap();
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), t.len());
            prop_assert!((back.dt() - t.dt()).abs() <= 1e-12 * t.dt());
            for (a, b) in back.truth().iter().zip(t.truth()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            for (a, b) in back.measured().iter().zip(t.measured()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
