//! Causal FIR Wiener filter.
//!
//! The coefficients solve the normal equations `R_xx h = r_sx`, where `R_xx`
//! is the symmetric Toeplitz matrix built from the autocorrelation of the
//! noisy input and `r_sx` is the cross-correlation between the desired
//! signal and the input. Correlations use the biased (`1/N`) estimator, which
//! keeps `R_xx` positive semidefinite so the Levinson recursion applies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Filter length that consumes the full 180-sample window.
pub const FULL_LENGTH: usize = 180;
/// Reduced-length variants.
pub const REDUCED_LENGTHS: [usize; 2] = [135, 90];

const REFLECTION_LIMIT: f64 = 1.0 - 1e-12;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSet {
    pub r_xx: Vec<f64>,
    pub r_sx: Vec<f64>,
    pub n_samples: usize,
}

impl CorrelationSet {
    /// Correlations of `desired` against the noisy `input` at lags `0..m`.
    pub fn estimate(desired: &[f64], input: &[f64], m: usize) -> Result<Self> {
        Ok(CorrelationSet {
            r_xx: autocorr(input, m)?,
            r_sx: crosscorr(desired, input, m)?,
            n_samples: input.len(),
        })
    }

    pub fn lags(&self) -> usize {
        self.r_xx.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    h: Vec<f64>,
}

impl FirFilter {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::param("a FIR filter needs at least one coefficient"));
        }
        if !h.iter().all(|c| c.is_finite()) {
            return Err(Error::param("FIR coefficients must be finite"));
        }
        Ok(FirFilter { h })
    }

    pub fn identity() -> Self {
        FirFilter { h: vec![1.0] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.h
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

fn check_lags(n: usize, m: usize) -> Result<()> {
    if m > n {
        return Err(Error::param(format!(
            "{m} lags requested from a series of {n} samples"
        )));
    }
    Ok(())
}

/// Biased autocorrelation `r(τ) = (1/N) Σ x[k] x[k+τ]` for `τ < m`.
pub fn autocorr(x: &[f64], m: usize) -> Result<Vec<f64>> {
    check_lags(x.len(), m)?;
    let n = x.len() as f64;
    Ok((0..m)
        .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect())
}

/// Biased cross-correlation `r_sx(τ) = (1/N) Σ s[k+τ] x[k]`: the desired
/// sample τ steps after each input sample. This is the right-hand side of
/// the causal normal equations.
pub fn crosscorr(s: &[f64], x: &[f64], m: usize) -> Result<Vec<f64>> {
    if s.len() != x.len() {
        return Err(Error::param(format!(
            "signal has {} samples but input has {}",
            s.len(),
            x.len()
        )));
    }
    check_lags(x.len(), m)?;
    let n = x.len() as f64;
    Ok((0..m)
        .map(|lag| x.iter().zip(&s[lag..]).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect())
}

/// Solves the order-`m` normal equations.
pub fn design(corr: &CorrelationSet, m: usize) -> Result<FirFilter> {
    if m == 0 {
        return Err(Error::param("filter length must be at least 1"));
    }
    if corr.r_xx.len() < m || corr.r_sx.len() < m {
        return Err(Error::param(format!(
            "correlations cover {} lags, filter length {m} needs {m}",
            corr.r_xx.len().min(corr.r_sx.len())
        )));
    }
    let r = &corr.r_xx[..m];
    let b = &corr.r_sx[..m];
    if b.iter().all(|v| *v == 0.0) {
        return FirFilter::new(vec![0.0; m]);
    }

    let h = match levinson(r, b) {
        Some(h) if residual(r, b, &h) < RESIDUAL_TOL => h,
        _ => dense_solve(r, b)?,
    };
    let res = residual(r, b, &h);
    if !(res < RESIDUAL_TOL) {
        return Err(Error::Design {
            condition: condition_estimate(r),
            reason: format!("normal-equation residual {res:.3e}"),
        });
    }
    FirFilter::new(h)
}

/// Designs a length-`m` filter from the first `m` samples of a trajectory.
/// With `m` below the trajectory length this is the reduced-length scheme:
/// only `m` samples have to be accumulated before filtering.
pub fn design_from_trajectory(traj: &Trajectory, m: usize) -> Result<FirFilter> {
    if m == 0 || m > traj.len() {
        return Err(Error::param(format!(
            "filter length {m} must lie in 1..={}",
            traj.len()
        )));
    }
    let corr = CorrelationSet::estimate(&traj.truth()[..m], &traj.measured()[..m], m)?;
    design(&corr, m)
}

/// Causal convolution with zero initial state. Output length equals input
/// length.
pub fn apply(filter: &FirFilter, x: &[f64]) -> Vec<f64> {
    let h = &filter.h;
    (0..x.len())
        .map(|k| {
            let taps = h.len().min(k + 1);
            h[..taps]
                .iter()
                .zip(x[..=k].iter().rev())
                .map(|(c, v)| c * v)
                .sum()
        })
        .collect()
}

/// Design-data mean squared error of `h`: the full (zero-padded) convolution
/// of `x` compared against `s` padded with zeros, divided by `N`. This is
/// the criterion the biased-correlation normal equations minimize exactly.
pub fn design_mse(h: &[f64], s: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let full = n + h.len() - 1;
    let mut acc = 0.0;
    for k in 0..full {
        let lo = k.saturating_sub(n - 1);
        let hi = k.min(h.len() - 1);
        let y: f64 = (lo..=hi).map(|i| h[i] * x[k - i]).sum();
        let d = if k < n { s[k] } else { 0.0 };
        acc += (d - y) * (d - y);
    }
    acc / n as f64
}

/// `‖R h − b‖∞ / ‖b‖∞` for the Toeplitz matrix with first column `r`.
pub fn residual(r: &[f64], b: &[f64], h: &[f64]) -> f64 {
    let m = r.len();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let row: f64 = (0..m).map(|j| r[i.abs_diff(j)] * h[j]).sum();
        worst = worst.max((row - b[i]).abs());
    }
    let scale = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Levinson recursion for the symmetric Toeplitz system with first column
/// `r`. Returns `None` when a reflection coefficient reaches the unit circle
/// or the prediction error vanishes.
pub fn levinson(r: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let m = r.len();
    if r[0] <= 0.0 || !r[0].is_finite() {
        return None;
    }
    // a: prediction-error filter, err: its error power
    let mut a = Vec::with_capacity(m);
    a.push(1.0);
    let mut err = r[0];
    let mut x = Vec::with_capacity(m);
    x.push(b[0] / r[0]);
    let mut next = vec![0.0; m];

    for k in 1..m {
        let acc: f64 = (0..k).map(|i| a[i] * r[k - i]).sum();
        let refl = -acc / err;
        if !(refl.abs() < REFLECTION_LIMIT) {
            return None;
        }
        next[0] = 1.0;
        for i in 1..k {
            next[i] = a[i] + refl * a[k - i];
        }
        next[k] = refl;
        a.clear();
        a.extend_from_slice(&next[..=k]);
        err *= 1.0 - refl * refl;
        if !(err > 0.0) {
            return None;
        }

        let eps: f64 = (0..k).map(|i| x[i] * r[k - i]).sum();
        let mu = (b[k] - eps) / err;
        for i in 0..k {
            x[i] += mu * a[k - i];
        }
        x.push(mu);
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// General LU solve of the Toeplitz system.
pub fn dense_solve(r: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let m = r.len();
    let mat = toeplitz(r);
    let rhs = DVector::from_column_slice(b);
    match mat.lu().solve(&rhs) {
        Some(h) if h.iter().all(|v| v.is_finite()) => Ok(h.as_slice().to_vec()),
        _ => Err(Error::Design {
            condition: condition_estimate(r),
            reason: format!("order-{m} Toeplitz system is singular"),
        }),
    }
}

fn toeplitz(r: &[f64]) -> DMatrix<f64> {
    let m = r.len();
    DMatrix::from_fn(m, m, |i, j| r[i.abs_diff(j)])
}

/// 2-norm condition number from the singular values.
pub fn condition_estimate(r: &[f64]) -> f64 {
    let sv = toeplitz(r).singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_series(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn autocorr_examples() {
        assert_eq!(autocorr(&[1.0; 4], 2).unwrap(), vec![1.0, 0.75]);
        assert_eq!(autocorr(&[1.0, 0.0, 0.0, 0.0], 2).unwrap(), vec![0.25, 0.0]);
        assert!(matches!(autocorr(&[1.0; 3], 4), Err(Error::Parameter(_))));
    }

    #[test]
    fn correlations_match_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_series(&mut rng, 32);
        let s = random_series(&mut rng, 32);
        let n = 32;
        let rxx = autocorr(&x, n).unwrap();
        let rsx = crosscorr(&s, &x, n).unwrap();
        for tau in 0..n {
            let mut auto = 0.0;
            let mut cross = 0.0;
            for k in 0..n {
                if k + tau < n {
                    auto += x[k] * x[k + tau];
                    cross += s[k + tau] * x[k];
                }
            }
            assert!((rxx[tau] - auto / n as f64).abs() < 1e-12);
            assert!((rsx[tau] - cross / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn crosscorr_examples() {
        let x = [0.3, -1.2, 2.0, 0.7, 0.1];
        assert_eq!(crosscorr(&x, &x, 3).unwrap(), autocorr(&x, 3).unwrap());
        let r = crosscorr(&[1.0, -1.0, 1.0, -1.0], &[1.0; 4], 1).unwrap();
        assert_eq!(r, vec![0.0]);
        assert!(crosscorr(&[1.0; 3], &[1.0; 4], 1).is_err());
        assert!(crosscorr(&[1.0; 3], &[1.0; 3], 4).is_err());
    }

    #[test]
    fn scalar_wiener_gain() {
        let (sig, noise) = (4.0, 1.0);
        let corr = CorrelationSet {
            r_xx: vec![sig + noise],
            r_sx: vec![sig],
            n_samples: 10,
        };
        let f = design(&corr, 1).unwrap();
        assert_relative_eq!(f.coefficients()[0], 0.8, max_relative = 1e-15);
    }

    #[test]
    fn noiseless_design_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_series(&mut rng, 64);
        let corr = CorrelationSet::estimate(&x, &x, 16).unwrap();
        let f = design(&corr, 16).unwrap();
        assert!((f.coefficients()[0] - 1.0).abs() < 1e-9);
        for c in &f.coefficients()[1..] {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn two_tap_hand_case() {
        let corr = CorrelationSet {
            r_xx: vec![2.0, 1.0],
            r_sx: vec![1.0, 0.0],
            n_samples: 2,
        };
        let f = design(&corr, 2).unwrap();
        assert_relative_eq!(f.coefficients()[0], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(f.coefficients()[1], -1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn design_rejects_short_correlations() {
        let corr = CorrelationSet {
            r_xx: vec![1.0],
            r_sx: vec![1.0],
            n_samples: 1,
        };
        assert!(matches!(design(&corr, 2), Err(Error::Parameter(_))));
        assert!(matches!(design(&corr, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn singular_system_falls_back_then_fails() {
        // all-zero input: R is the zero matrix
        let corr = CorrelationSet {
            r_xx: vec![0.0, 0.0, 0.0],
            r_sx: vec![1.0, 0.0, 0.0],
            n_samples: 3,
        };
        match design(&corr, 3) {
            Err(Error::Design { condition, .. }) => assert!(condition.is_infinite()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unit_reflection_uses_dense_fallback() {
        // r = (1, 1, 1): rank one. Levinson hits |k| = 1 at order 2.
        assert!(levinson(&[1.0, 1.0], &[1.0, 1.0]).is_none());
        // consistent rank-deficient system still cannot be solved by LU
        assert!(design(
            &CorrelationSet {
                r_xx: vec![1.0, 1.0],
                r_sx: vec![1.0, 1.0],
                n_samples: 2
            },
            2
        )
        .is_err());
    }

    #[test]
    fn apply_examples() {
        let x = [3.0, -1.0, 4.0, 1.5];
        assert_eq!(apply(&FirFilter::identity(), &x), x.to_vec());
        let f = FirFilter::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            apply(&f, &[1.0; 7]),
            vec![1.0, 3.0, 6.0, 10.0, 10.0, 10.0, 10.0]
        );
        assert!(apply(&f, &[]).is_empty());
    }

    #[test]
    fn apply_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_series(&mut rng, 64);
        let x = random_series(&mut rng, 256);
        let y = apply(&FirFilter::new(h.clone()).unwrap(), &x);
        for k in 0..x.len() {
            let mut acc = 0.0;
            for i in 0..h.len() {
                if i <= k {
                    acc += h[i] * x[k - i];
                }
            }
            assert!((y[k] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn fir_validation() {
        assert!(FirFilter::new(vec![]).is_err());
        assert!(FirFilter::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn design_mse_matches_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = random_series(&mut rng, 40);
        let x: Vec<f64> = s.iter().map(|v| v + 0.3 * rng.random_range(-1.0..1.0)).collect();
        let h = random_series(&mut rng, 12);
        let m = h.len();
        let corr = CorrelationSet::estimate(&s, &x, m).unwrap();
        let power: f64 = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        let mut quad = power;
        for i in 0..m {
            quad -= 2.0 * h[i] * corr.r_sx[i];
            for j in 0..m {
                quad += h[i] * h[j] * corr.r_xx[i.abs_diff(j)];
            }
        }
        assert_relative_eq!(design_mse(&h, &s, &x), quad, max_relative = 1e-12);
    }
}
