//! `gpsfilt` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime or numerical
//! failures. Diagnostics go to stderr, data to stdout or `--out`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gpsfilt::harness::{self, Parallelism, Scheme, TimingSource};
use gpsfilt::trajectory::{self, Motion, Trajectory};
use gpsfilt::{Config, Error};

#[derive(Debug, Parser)]
#[command(name = "gpsfilt", version, about = "Denoise and benchmark GPS position series")]
pub struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a trajectory and write it as `t,truth,measured` CSV.
    Generate(GenerateArgs),
    /// Run one scheme over a trajectory.
    Run(RunArgs),
    /// Time schemes over a trajectory.
    Bench(BenchArgs),
    /// Full comparison report.
    Report(ReportArgs),
    /// Sampling frequency a Wiener variant needs to match a reference time.
    Freq(FreqArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MotionKind {
    Static,
    ConstantVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Trajectory CSV; when absent a trajectory is synthesized.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "static")]
    motion: MotionKind,
    #[arg(long, default_value_t = 100.0)]
    position: f64,
    /// Meters per second, constant-velocity motion only.
    #[arg(long, default_value_t = 1.0)]
    velocity: f64,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    ar: Option<f64>,
    #[arg(long)]
    bias: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// kalman, mlp, wiener, or an id such as `wiener-par3(90)`.
    #[arg(long)]
    scheme: String,
    /// Wiener filter length.
    #[arg(long)]
    length: Option<usize>,
    /// 1 = serial, 2 or 3 = block-parallel FIR.
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `k,abs_error` rows here.
    #[arg(long)]
    errors: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Repeatable; defaults to every scheme.
    #[arg(long)]
    scheme: Vec<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    scheme: Vec<String>,
    #[arg(long)]
    reps: Option<usize>,
    /// Use the published processing times instead of measuring.
    #[arg(long)]
    inject_published_times: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FreqArgs {
    /// Reference processing time, ms.
    #[arg(long)]
    t_ref: f64,
    /// Wiener processing time, ms.
    #[arg(long)]
    t_proc: f64,
    /// Samples to accumulate.
    #[arg(long)]
    n: usize,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(Error::Io(e))
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Parses `argv` (including the program name) and runs the command.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(cli: Cli) -> CliResult {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Generate(args) => generate(&mut cfg, args),
        Command::Run(args) => run(&mut cfg, args),
        Command::Bench(args) => bench(&mut cfg, args),
        Command::Report(args) => report(&mut cfg, args),
        Command::Freq(args) => freq(args),
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_source(cfg: &mut Config, source: &SourceArgs) -> CliResult<Trajectory> {
    if let Some(seed) = source.seed {
        cfg.noise.seed = seed;
    }
    if let Some(n) = source.n {
        cfg.n = n;
    }
    match &source.input {
        Some(path) => {
            if source.seed.is_some() || source.n.is_some() {
                return Err(Failure::Usage(
                    "--seed and --n only apply to synthesized trajectories".into(),
                ));
            }
            Ok(trajectory::load_csv(path)?)
        }
        None => Ok(trajectory::generate(cfg.n, cfg.dt, Motion::default(), &cfg.noise)?),
    }
}

fn generate(cfg: &mut Config, args: GenerateArgs) -> CliResult {
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(seed) = args.seed {
        cfg.noise.seed = seed;
    }
    if let Some(sigma) = args.sigma {
        cfg.noise.white_sigma = sigma;
    }
    if let Some(ar) = args.ar {
        cfg.noise.ar_coeff = ar;
    }
    if let Some(bias) = args.bias {
        cfg.noise.bias = bias;
    }
    let motion = match args.motion {
        MotionKind::Static => Motion::Static {
            position: args.position,
        },
        MotionKind::ConstantVelocity => Motion::ConstantVelocity {
            start: args.position,
            velocity: args.velocity,
        },
    };
    let traj = trajectory::generate(cfg.n, cfg.dt, motion, &cfg.noise)?;
    let mut out = output(args.out.as_deref())?;
    traj.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn resolve_scheme(args: &RunArgs, cfg: &mut Config) -> CliResult<Scheme> {
    let mut scheme: Scheme = args
        .scheme
        .parse()
        .map_err(|e: Error| Failure::Usage(e.to_string()))?;
    match &mut scheme {
        Scheme::Wiener { length, parallel } => {
            if args.scheme.trim() == "wiener" {
                *length = cfg.wiener_length;
            }
            if let Some(l) = args.length {
                *length = l;
            }
            if let Some(p) = args.parallel {
                *parallel =
                    Parallelism::from_order(p).map_err(|e| Failure::Usage(e.to_string()))?;
            }
            cfg.wiener_length = *length;
        }
        _ => {
            if args.length.is_some() || args.parallel.is_some() {
                return Err(Failure::Usage(
                    "--length and --parallel only apply to the wiener scheme".into(),
                ));
            }
        }
    }
    Ok(scheme)
}

fn run(cfg: &mut Config, args: RunArgs) -> CliResult {
    if args.format == Format::Table {
        return Err(Failure::Usage("run supports --format csv or json".into()));
    }
    let scheme = resolve_scheme(&args, cfg)?;
    let traj = load_source(cfg, &args.source)?;
    let result = harness::run_scheme(&scheme, &traj, cfg)?;
    let truth = &traj.truth()[result.offset..result.offset + result.estimates.len()];
    let measured = &traj.measured()[result.offset..result.offset + result.estimates.len()];

    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => {
            writeln!(out, "k,truth,measured,estimate")?;
            for (i, ((s, x), e)) in truth.iter().zip(measured).zip(&result.estimates).enumerate() {
                writeln!(out, "{},{},{},{}", result.offset + i, s, x, e)?;
            }
            writeln!(
                out,
                "# scheme={} mean_abs={} variance={} count={}",
                scheme, result.stats.mean_abs, result.stats.variance, result.stats.count
            )?;
        }
        _ => {
            let value = serde_json::json!({
                "scheme": scheme.id(),
                "first_sample": result.offset,
                "estimates": result.estimates,
                "stats": result.stats,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("json"))?;
        }
    }
    out.flush()?;

    if let Some(path) = &args.errors {
        emit_error_series(&result.estimates, truth, result.offset, path)?;
    }
    Ok(())
}

/// Writes `k,abs_error` rows, with `k` counted from `first_index`.
pub fn emit_error_series(
    estimates: &[f64],
    truth: &[f64],
    first_index: usize,
    path: &Path,
) -> gpsfilt::Result<()> {
    if estimates.len() != truth.len() {
        return Err(Error::Parameter(format!(
            "{} estimates for {} truth samples",
            estimates.len(),
            truth.len()
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "k,abs_error")?;
    for (i, (e, s)) in estimates.iter().zip(truth).enumerate() {
        writeln!(out, "{},{}", first_index + i, (e - s).abs())?;
    }
    out.flush()?;
    Ok(())
}

fn parse_schemes(names: &[String]) -> CliResult<Vec<Scheme>> {
    if names.is_empty() {
        return Ok(harness::default_schemes());
    }
    names
        .iter()
        .map(|n| n.parse().map_err(|e: Error| Failure::Usage(e.to_string())))
        .collect()
}

fn bench(cfg: &mut Config, args: BenchArgs) -> CliResult {
    let schemes = parse_schemes(&args.scheme)?;
    let traj = load_source(cfg, &args.source)?;
    let reps = args.reps.unwrap_or(cfg.repetitions);
    let results = schemes
        .iter()
        .map(|s| harness::time_scheme(s, &traj, cfg, reps))
        .collect::<gpsfilt::Result<Vec<_>>>()?;

    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&results).expect("json")
        )?,
        Format::Csv => {
            writeln!(out, "scheme,median_ms,min_ms,max_ms,repetitions,mac_per_output")?;
            for r in &results {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.scheme_id,
                    r.processing_ms,
                    r.min_ms,
                    r.max_ms,
                    r.repetitions,
                    r.mac_per_output.map(|m| m.to_string()).unwrap_or_default()
                )?;
            }
        }
        Format::Table => {
            writeln!(
                out,
                "{:<20}{:>12}{:>12}{:>12}{:>12}",
                "scheme", "median ms", "min ms", "max ms", "MAC/out"
            )?;
            for r in &results {
                writeln!(
                    out,
                    "{:<20}{:>12.5}{:>12.5}{:>12.5}{:>12}",
                    r.scheme_id,
                    r.processing_ms,
                    r.min_ms,
                    r.max_ms,
                    r.mac_per_output.map(|m| m.to_string()).unwrap_or_else(|| "-".into())
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn report(cfg: &mut Config, args: ReportArgs) -> CliResult {
    if args.format == Format::Csv {
        return Err(Failure::Usage("report supports --format json or table".into()));
    }
    let schemes = parse_schemes(&args.scheme)?;
    let traj = load_source(cfg, &args.source)?;
    let timing = if args.inject_published_times {
        if args.reps.is_some() {
            return Err(Failure::Usage(
                "--reps has no effect with --inject-published-times".into(),
            ));
        }
        TimingSource::Published
    } else {
        TimingSource::Measured {
            repetitions: args.reps.unwrap_or(cfg.repetitions),
        }
    };
    let report = harness::build_report(&traj, &schemes, cfg, &timing)?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Json => writeln!(out, "{}", report.to_json())?,
        _ => write!(out, "{}", report.to_text())?,
    }
    out.flush()?;
    Ok(())
}

fn freq(args: FreqArgs) -> CliResult {
    match harness::required_frequency(args.t_ref, args.t_proc, args.n)? {
        Some(hz) => println!("{:.2} kHz", hz * 1e-3),
        None => println!("impossible"),
    }
    Ok(())
}
