//! Scheme execution, timing and comparison reports.
//!
//! A report has four sections:
//!
//! - `precision`: absolute-error mean and variance of the raw measurements
//!   and of each base scheme,
//! - `processing_time`: median processing time of each base scheme,
//! - `wiener_variants`: precision, time and MAC cost of the parallel and
//!   reduced-length Wiener filters,
//! - `sampling_frequency`: the sampling rate each Wiener variant would need
//!   so that accumulating its window plus processing it takes as long as a
//!   real-time scheme.
//!
//! Timing covers the processing phase only. Wiener sample accumulation and
//! MLP training are excluded.

use std::fmt::{self, Write as _};
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::kalman::{self, KalmanModel};
use crate::mlp::{self, MlpParams};
use crate::parfir::{self, MacCount};
use crate::trajectory::{error_stats, ErrorStats, Trajectory};
use crate::wiener::{self, FULL_LENGTH};

const WARMUP_RUNS: usize = 3;
pub const MIN_REPETITIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Serial,
    Two,
    Three,
}

impl Parallelism {
    pub fn order(self) -> usize {
        match self {
            Parallelism::Serial => 1,
            Parallelism::Two => 2,
            Parallelism::Three => 3,
        }
    }

    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Parallelism::Serial),
            2 => Ok(Parallelism::Two),
            3 => Ok(Parallelism::Three),
            _ => Err(Error::param(format!(
                "parallel order must be 1, 2 or 3, got {order}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Scheme {
    Kalman,
    Mlp,
    Wiener {
        length: usize,
        parallel: Parallelism,
    },
}

impl Scheme {
    pub fn wiener(length: usize) -> Self {
        Scheme::Wiener {
            length,
            parallel: Parallelism::Serial,
        }
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn is_wiener(&self) -> bool {
        matches!(self, Scheme::Wiener { .. })
    }

    /// Samples that must be accumulated before the scheme can run.
    pub fn window(&self) -> Option<usize> {
        match self {
            Scheme::Wiener { length, .. } => Some(*length),
            _ => None,
        }
    }

    pub fn mac_per_block(&self) -> Option<MacCount> {
        match *self {
            Scheme::Wiener { length, parallel } => {
                Some(parfir::mac_per_block(length, parallel.order()))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Kalman => f.write_str("kalman"),
            Scheme::Mlp => f.write_str("mlp"),
            Scheme::Wiener { length, parallel } => match parallel {
                Parallelism::Serial => write!(f, "wiener({length})"),
                Parallelism::Two => write!(f, "wiener-par2({length})"),
                Parallelism::Three => write!(f, "wiener-par3({length})"),
            },
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// Accepts the display form, plus bare `wiener` for the full length.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "kalman" => return Ok(Scheme::Kalman),
            "mlp" | "neural" => return Ok(Scheme::Mlp),
            "wiener" => return Ok(Scheme::wiener(FULL_LENGTH)),
            _ => {}
        }
        let bad = || Error::param(format!("unknown scheme `{s}`"));
        let (head, rest) = s.split_once('(').ok_or_else(bad)?;
        let length: usize = rest
            .strip_suffix(')')
            .and_then(|v| v.parse().ok())
            .ok_or_else(bad)?;
        let parallel = match head {
            "wiener" => Parallelism::Serial,
            "wiener-par2" => Parallelism::Two,
            "wiener-par3" => Parallelism::Three,
            _ => return Err(bad()),
        };
        Ok(Scheme::Wiener { length, parallel })
    }
}

/// Kalman, MLP, full Wiener, its 2- and 3-parallel forms and the two
/// reduced-length filters.
pub fn default_schemes() -> Vec<Scheme> {
    vec![
        Scheme::Kalman,
        Scheme::Mlp,
        Scheme::wiener(FULL_LENGTH),
        Scheme::Wiener {
            length: FULL_LENGTH,
            parallel: Parallelism::Two,
        },
        Scheme::Wiener {
            length: FULL_LENGTH,
            parallel: Parallelism::Three,
        },
        Scheme::wiener(wiener::REDUCED_LENGTHS[0]),
        Scheme::wiener(wiener::REDUCED_LENGTHS[1]),
    ]
}

pub fn kalman_model(traj: &Trajectory, cfg: &Config) -> Result<KalmanModel> {
    KalmanModel::new(traj.dt(), cfg.kalman_q, cfg.kalman_r())
}

/// A scheme ready to process a trajectory: trained or designed state that
/// is not part of the timed processing phase.
#[derive(Debug, Clone)]
pub enum Prepared {
    Kalman(KalmanModel),
    Mlp(MlpParams),
    Wiener { length: usize, order: usize },
}

pub fn prepare(scheme: &Scheme, traj: &Trajectory, cfg: &Config) -> Result<Prepared> {
    Ok(match *scheme {
        Scheme::Kalman => Prepared::Kalman(kalman_model(traj, cfg)?),
        Scheme::Mlp => Prepared::Mlp(mlp::fit_first_half(traj, &cfg.mlp)?),
        Scheme::Wiener { length, parallel } => {
            if length == 0 || length > traj.len() {
                return Err(Error::param(format!(
                    "Wiener length {length} must lie in 1..={}",
                    traj.len()
                )));
            }
            Prepared::Wiener {
                length,
                order: parallel.order(),
            }
        }
    })
}

impl Prepared {
    /// The processing phase. Returns the estimates and the index of the
    /// first sample they cover.
    pub fn process(&self, traj: &Trajectory) -> Result<(Vec<f64>, usize)> {
        match self {
            Prepared::Kalman(model) => Ok((kalman::run(traj, model)?.0, 0)),
            Prepared::Mlp(params) => Ok((
                mlp::predict_second_half(params, traj.measured()),
                mlp::split_point(traj.len()),
            )),
            Prepared::Wiener { length, order } => {
                let filter = wiener::design_from_trajectory(traj, *length)?;
                Ok((
                    parfir::apply_parallel(&filter, traj.measured(), *order)?,
                    0,
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutput {
    pub scheme: Scheme,
    pub estimates: Vec<f64>,
    /// Trajectory index of `estimates[0]`.
    pub offset: usize,
    pub stats: ErrorStats,
}

/// Runs a scheme end to end and scores it against truth.
pub fn run_scheme(scheme: &Scheme, traj: &Trajectory, cfg: &Config) -> Result<SchemeOutput> {
    let prepared = prepare(scheme, traj, cfg)?;
    let (estimates, offset) = prepared.process(traj)?;
    let skip = match scheme {
        Scheme::Wiener { length, .. } if cfg.wiener_skip_transient => {
            (length - 1).min(estimates.len() - 1)
        }
        _ => 0,
    };
    let start = offset + skip;
    let stats = error_stats(&estimates[skip..], &traj.truth()[start..start + estimates.len() - skip])?;
    Ok(SchemeOutput {
        scheme: *scheme,
        estimates,
        offset,
        stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub scheme_id: String,
    /// Median over the timed repetitions.
    pub processing_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    /// Zero when the time was injected rather than measured.
    pub repetitions: usize,
    pub mac_per_output: Option<f64>,
}

impl TimingResult {
    pub fn injected(scheme: &Scheme, ms: f64) -> Self {
        TimingResult {
            scheme_id: scheme.id(),
            processing_ms: ms,
            min_ms: ms,
            max_ms: ms,
            repetitions: 0,
            mac_per_output: scheme.mac_per_block().map(|m| m.per_output()),
        }
    }

    pub fn is_measured(&self) -> bool {
        self.repetitions > 0
    }

    pub fn spread_ms(&self) -> f64 {
        self.max_ms - self.min_ms
    }
}

/// Median wall time of the processing phase over `repetitions` runs, after
/// a few discarded warm-up runs.
pub fn time_scheme(
    scheme: &Scheme,
    traj: &Trajectory,
    cfg: &Config,
    repetitions: usize,
) -> Result<TimingResult> {
    if repetitions < MIN_REPETITIONS {
        return Err(Error::param(format!(
            "at least {MIN_REPETITIONS} repetitions are required, got {repetitions}"
        )));
    }
    let prepared = prepare(scheme, traj, cfg)?;
    for _ in 0..WARMUP_RUNS {
        black_box(prepared.process(black_box(traj))?);
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        black_box(prepared.process(black_box(traj))?);
        // clamp keeps the invariant processing_ms > 0 on coarse clocks
        samples.push((start.elapsed().as_secs_f64() * 1e3).max(1e-9));
    }
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    let median = if samples.len() % 2 == 0 {
        0.5 * (samples[mid - 1] + samples[mid])
    } else {
        samples[mid]
    };
    Ok(TimingResult {
        scheme_id: scheme.id(),
        processing_ms: median,
        min_ms: samples[0],
        max_ms: samples[samples.len() - 1],
        repetitions,
        mac_per_output: scheme.mac_per_block().map(|m| m.per_output()),
    })
}

/// Sampling frequency needed to accumulate `n_samples` in the time a
/// reference scheme leaves after processing: `n / (t_ref − t_proc)`.
/// `None` when processing alone already exceeds the reference time.
pub fn required_frequency(t_ref_ms: f64, t_proc_ms: f64, n_samples: usize) -> Result<Option<f64>> {
    if !(t_ref_ms > 0.0 && t_ref_ms.is_finite()) || !(t_proc_ms > 0.0 && t_proc_ms.is_finite())
    {
        return Err(Error::param(format!(
            "processing times must be positive, got {t_ref_ms} ms and {t_proc_ms} ms"
        )));
    }
    if n_samples == 0 {
        return Err(Error::param("at least one sample must be accumulated"));
    }
    if t_ref_ms <= t_proc_ms {
        return Ok(None);
    }
    let sampling_period_s = (t_ref_ms - t_proc_ms) * 1e-3 / n_samples as f64;
    Ok(Some(1.0 / sampling_period_s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRequirement {
    pub reference_scheme: String,
    pub wiener_variant: String,
    /// `None` marks an impossible combination.
    pub required_hz: Option<f64>,
    pub samples_to_accumulate: usize,
}

impl FrequencyRequirement {
    pub fn is_feasible(&self) -> bool {
        self.required_hz.is_some()
    }

    pub fn required_khz(&self) -> Option<f64> {
        self.required_hz.map(|hz| hz * 1e-3)
    }
}

/// Every (reference, Wiener variant) pair.
pub fn frequency_matrix(
    references: &[(Scheme, f64)],
    variants: &[(Scheme, f64)],
) -> Result<Vec<FrequencyRequirement>> {
    let mut out = Vec::with_capacity(references.len() * variants.len());
    for (reference, t_ref) in references {
        for (variant, t_proc) in variants {
            let n = variant.window().ok_or_else(|| {
                Error::param(format!("`{variant}` does not accumulate samples"))
            })?;
            out.push(FrequencyRequirement {
                reference_scheme: reference.id(),
                wiener_variant: variant.id(),
                required_hz: required_frequency(*t_ref, *t_proc, n)?,
                samples_to_accumulate: n,
            });
        }
    }
    Ok(out)
}

/// Processing times (ms) published alongside the original MATLAB study.
pub mod published {
    use super::{Parallelism, Scheme};
    use crate::wiener::FULL_LENGTH;

    pub const KALMAN_MS: f64 = 20.3281;
    pub const NEURAL_MS: f64 = 16.9648;
    pub const WIENER_MS: f64 = 25.2656;
    pub const WIENER_PAR2_MS: f64 = 20.234;
    pub const WIENER_PAR3_MS: f64 = 15.1483;
    pub const WIENER_135_MS: f64 = 15.5938;
    pub const WIENER_90_MS: f64 = 9.688;

    pub fn time_ms(scheme: &Scheme) -> Option<f64> {
        Some(match *scheme {
            Scheme::Kalman => KALMAN_MS,
            Scheme::Mlp => NEURAL_MS,
            Scheme::Wiener { length, parallel } => match (length, parallel) {
                (FULL_LENGTH, Parallelism::Serial) => WIENER_MS,
                (FULL_LENGTH, Parallelism::Two) => WIENER_PAR2_MS,
                (FULL_LENGTH, Parallelism::Three) => WIENER_PAR3_MS,
                (135, Parallelism::Serial) => WIENER_135_MS,
                (90, Parallelism::Serial) => WIENER_90_MS,
                _ => return None,
            },
        })
    }

    pub fn references() -> Vec<(Scheme, f64)> {
        vec![(Scheme::Kalman, KALMAN_MS), (Scheme::Mlp, NEURAL_MS)]
    }

    pub fn variants() -> Vec<(Scheme, f64)> {
        super::default_schemes()
            .into_iter()
            .filter(Scheme::is_wiener)
            .map(|s| (s, time_ms(&s).expect("default variant has a published time")))
            .collect()
    }
}

/// Where a report's processing times come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TimingSource {
    Measured { repetitions: usize },
    /// Published constants; every scheme must have one.
    Published,
    Injected(Vec<(Scheme, f64)>),
}

impl TimingSource {
    fn timing(&self, scheme: &Scheme, traj: &Trajectory, cfg: &Config) -> Result<TimingResult> {
        match self {
            TimingSource::Measured { repetitions } => time_scheme(scheme, traj, cfg, *repetitions),
            TimingSource::Published => published::time_ms(scheme)
                .map(|ms| TimingResult::injected(scheme, ms))
                .ok_or_else(|| Error::param(format!("no published time for `{scheme}`"))),
            TimingSource::Injected(times) => times
                .iter()
                .find(|(s, _)| s == scheme)
                .map(|(_, ms)| TimingResult::injected(scheme, *ms))
                .ok_or_else(|| Error::param(format!("no injected time for `{scheme}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub samples: usize,
    pub dt: f64,
    pub axis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeReport {
    pub scheme: String,
    pub stats: ErrorStats,
    pub first_scored_sample: usize,
    pub timing: TimingResult,
    pub mac_per_block: Option<MacCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub label: String,
    pub mean_abs: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRow {
    pub label: String,
    pub processing_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub label: String,
    pub mean_abs: f64,
    pub variance: f64,
    pub processing_ms: f64,
    pub mac_per_output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySection {
    /// From this run's processing times.
    pub measured: Vec<FrequencyRequirement>,
    /// From the published processing times.
    pub published: Vec<FrequencyRequirement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub trajectory: TrajectorySummary,
    pub timing_source: String,
    pub precision: Vec<PrecisionRow>,
    pub processing_time: Vec<TimeRow>,
    pub wiener_variants: Vec<VariantRow>,
    pub sampling_frequency: FrequencySection,
    pub schemes: Vec<SchemeReport>,
}

pub fn build_report(
    traj: &Trajectory,
    schemes: &[Scheme],
    cfg: &Config,
    timing: &TimingSource,
) -> Result<ComparisonReport> {
    if schemes.is_empty() {
        return Err(Error::param("a report needs at least one scheme"));
    }

    let mut reports = Vec::with_capacity(schemes.len());
    for scheme in schemes {
        let out = run_scheme(scheme, traj, cfg)?;
        let timing = timing.timing(scheme, traj, cfg)?;
        let skip = match scheme {
            Scheme::Wiener { length, .. } if cfg.wiener_skip_transient => length - 1,
            _ => 0,
        };
        reports.push(SchemeReport {
            scheme: scheme.id(),
            stats: out.stats,
            first_scored_sample: (out.offset + skip).min(traj.len() - 1),
            timing,
            mac_per_block: scheme.mac_per_block(),
        });
    }
    let by_scheme = |s: &Scheme| {
        schemes
            .iter()
            .position(|x| x == s)
            .map(|i| &reports[i])
    };

    let raw = traj.raw_error();
    let mut precision = vec![PrecisionRow {
        label: "original".into(),
        mean_abs: raw.mean_abs,
        variance: raw.variance,
    }];
    let mut processing_time = Vec::new();
    for base in [Scheme::Kalman, Scheme::Mlp, Scheme::wiener(FULL_LENGTH)] {
        if let Some(r) = by_scheme(&base) {
            precision.push(PrecisionRow {
                label: r.scheme.clone(),
                mean_abs: r.stats.mean_abs,
                variance: r.stats.variance,
            });
            processing_time.push(TimeRow {
                label: r.scheme.clone(),
                processing_ms: r.timing.processing_ms,
            });
        }
    }

    let wiener_variants = schemes
        .iter()
        .zip(&reports)
        .filter(|(s, _)| s.is_wiener())
        .map(|(s, r)| VariantRow {
            label: r.scheme.clone(),
            mean_abs: r.stats.mean_abs,
            variance: r.stats.variance,
            processing_ms: r.timing.processing_ms,
            mac_per_output: s.mac_per_block().map(|m| m.per_output()).unwrap_or(0.0),
        })
        .collect();

    let timed = |pred: fn(&Scheme) -> bool| -> Vec<(Scheme, f64)> {
        schemes
            .iter()
            .zip(&reports)
            .filter(|(s, _)| pred(s))
            .map(|(s, r)| (*s, r.timing.processing_ms))
            .collect()
    };
    let references = timed(|s| matches!(s, Scheme::Kalman | Scheme::Mlp));
    let variants = timed(Scheme::is_wiener);
    let sampling_frequency = FrequencySection {
        measured: frequency_matrix(&references, &variants)?,
        published: frequency_matrix(&published::references(), &published::variants())?,
    };

    Ok(ComparisonReport {
        trajectory: TrajectorySummary {
            samples: traj.len(),
            dt: traj.dt(),
            axis: traj.axis_label().to_string(),
        },
        timing_source: match timing {
            TimingSource::Measured { repetitions } => format!("measured (median of {repetitions})"),
            TimingSource::Published => "published".into(),
            TimingSource::Injected(_) => "injected".into(),
        },
        precision,
        processing_time,
        wiener_variants,
        sampling_frequency,
        schemes: reports,
    })
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// Aligned text tables.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "trajectory: {} samples, dt = {} s, axis {}; timing: {}",
            self.trajectory.samples, self.trajectory.dt, self.trajectory.axis, self.timing_source
        );

        let _ = writeln!(s, "\nPrecision (absolute error)");
        let labels: Vec<&str> = self.precision.iter().map(|r| r.label.as_str()).collect();
        table_row(&mut s, "", &labels);
        table_row(&mut s, "mean (m)", &fmt_all(self.precision.iter().map(|r| r.mean_abs)));
        table_row(&mut s, "variance", &fmt_all(self.precision.iter().map(|r| r.variance)));

        let _ = writeln!(s, "\nProcessing time");
        let labels: Vec<&str> = self.processing_time.iter().map(|r| r.label.as_str()).collect();
        table_row(&mut s, "", &labels);
        table_row(
            &mut s,
            "time (ms)",
            &fmt_all(self.processing_time.iter().map(|r| r.processing_ms)),
        );

        let _ = writeln!(s, "\nWiener variants");
        let v = &self.wiener_variants;
        let labels: Vec<&str> = v.iter().map(|r| r.label.as_str()).collect();
        table_row(&mut s, "", &labels);
        table_row(&mut s, "mean (m)", &fmt_all(v.iter().map(|r| r.mean_abs)));
        table_row(&mut s, "variance", &fmt_all(v.iter().map(|r| r.variance)));
        table_row(&mut s, "time (ms)", &fmt_all(v.iter().map(|r| r.processing_ms)));
        table_row(&mut s, "MAC/output", &fmt_all(v.iter().map(|r| r.mac_per_output)));

        for (title, cells) in [
            ("this report's", &self.sampling_frequency.measured),
            ("published", &self.sampling_frequency.published),
        ] {
            let _ = writeln!(s, "\nRequired sampling frequency, kHz ({title} times)");
            frequency_table(&mut s, cells);
        }
        s
    }
}

fn fmt_all(values: impl Iterator<Item = f64>) -> Vec<String> {
    values.map(|v| format!("{v:.4}")).collect()
}

fn table_row<S: AsRef<str>>(out: &mut String, head: &str, cells: &[S]) {
    let _ = write!(out, "{head:<12}");
    for c in cells {
        let _ = write!(out, "{:>18}", c.as_ref());
    }
    out.push('\n');
}

fn frequency_table(out: &mut String, cells: &[FrequencyRequirement]) {
    let mut columns: Vec<&str> = Vec::new();
    let mut rows: Vec<&str> = Vec::new();
    for c in cells {
        if !columns.contains(&c.wiener_variant.as_str()) {
            columns.push(&c.wiener_variant);
        }
        if !rows.contains(&c.reference_scheme.as_str()) {
            rows.push(&c.reference_scheme);
        }
    }
    table_row(out, "", &columns);
    for row in rows {
        let values: Vec<String> = columns
            .iter()
            .map(|col| {
                cells
                    .iter()
                    .find(|c| c.reference_scheme == row && c.wiener_variant == *col)
                    .map(|c| match c.required_khz() {
                        Some(khz) => format!("{khz:.2}"),
                        None => "Impossible".to_string(),
                    })
                    .unwrap_or_default()
            })
            .collect();
        table_row(out, row, &values);
    }
}
