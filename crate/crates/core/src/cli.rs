//! The `fbm` command line: `simulate`, `estimate`, `verify` and `bench`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 verification
//! failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::circulant::{fgn_to_fbm, CholeskyFactor, CirculantEmbedding, CHOLESKY_MAX_N};
use crate::cov::HurstParameter;
use crate::error::Error;
use crate::filters::{Filter, FilterName};
use crate::hurst::{
    estimate_hurst, estimate_with_ci, EstimateResult, EstimatorConfig, DEFAULT_MC_REPS, MIN_MC_REPS,
};
use crate::io::{self, Format, Metadata, SeriesKind};
use crate::rng::{derive_seed, path_rng};
use crate::verify::{self, Suite, VerifyOptions, DEFAULT_VERIFY_REPS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fbm",
    version,
    about = "Simulate fractional Brownian motion and estimate its Hurst parameter"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate fBm paths (or fGn increments) by circulant embedding.
    Simulate(SimulateArgs),
    /// Estimate H for every series in a CSV or raw file.
    Estimate(EstimateArgs),
    /// Run the built-in verification checks.
    Verify(VerifyArgs),
    /// Time the circulant and Cholesky samplers.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Hurst parameter in (0, 1).
    #[arg(long, value_parser = parse_hurst)]
    pub h: f64,
    /// Grid exponent: N = 2^q + 1 fGn samples per path.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..=28))]
    pub q: u32,
    /// Number of fGn samples per path; overrides --q.
    #[arg(long, conflicts_with = "q", value_parser = clap::value_parser!(u64).range(2..))]
    pub n: Option<u64>,
    /// Time horizon T; the grid step is T/N.
    #[arg(long = "t", default_value_t = 1.0, value_parser = parse_positive)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// Random seed; drawn at random and recorded in the metadata if omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the fGn increments instead of the fBm path.
    #[arg(long)]
    pub noise: bool,
    /// Output file; CSV goes to stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (output does not depend on this).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Input format; taken from the metadata sidecar or the file extension
    /// when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// increments1, increments2 or daubechies4.
    #[arg(long, default_value = "increments2")]
    pub filter: FilterName,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub dilations: Vec<usize>,
    /// Confidence level for a parametric-bootstrap interval, e.g. 0.95.
    #[arg(long, value_parser = parse_level)]
    pub ci: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MC_REPS)]
    pub mc_reps: usize,
    /// Seed for the bootstrap; series i uses a seed derived from it and i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print a JSON report instead of text.
    #[arg(long)]
    pub json: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only these suites (comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub only: Vec<Suite>,
    /// Monte Carlo replications; tolerances widen as this shrinks.
    #[arg(long, default_value_t = DEFAULT_VERIFY_REPS)]
    pub mc_reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=24))]
    pub min_q: u32,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=24))]
    pub max_q: u32,
    /// Minimum wall time per measurement, in seconds.
    #[arg(long, default_value_t = 0.2, value_parser = parse_positive)]
    pub min_time: f64,
    #[arg(long)]
    pub json: bool,
}

fn parse_hurst(s: &str) -> Result<f64, String> {
    let h: f64 = s.parse().map_err(|e| format!("{e}"))?;
    HurstParameter::new(h)
        .map(|h| h.value())
        .map_err(|e| e.to_string())
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be positive and finite, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_level(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x < 1.0 => Ok(x),
        Ok(x) => Err(format!("must lie in (0, 1), got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

/// Outcome of a subcommand that did not succeed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Verification(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Verification(_) => EXIT_VERIFY,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a, out, err),
        Command::Estimate(a) => estimate(&a, out, err),
        Command::Verify(a) => run_verify(&a, out, err),
        Command::Bench(a) => bench(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.exit_code()
        }
    }
}

fn with_threads<R: Send>(threads: Option<u64>, f: impl FnOnce() -> R + Send) -> Result<R, Failure> {
    match threads {
        None => Ok(f()),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Failure::Data(format!("cannot start thread pool: {e}"))),
    }
}

fn grid_exponent(n: usize) -> Option<u32> {
    let m = n.checked_sub(1)?;
    m.is_power_of_two().then(|| m.trailing_zeros())
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let n = match a.n {
        Some(n) => usize::try_from(n).map_err(|_| Failure::Usage(format!("--n {n} too large")))?,
        None => (1usize << a.q) + 1,
    };
    if grid_exponent(n).is_none() {
        let _ = writeln!(
            err,
            "warning: N = {n} is not 2^q + 1; the FFT length 2(N - 1) is not a power of two"
        );
    }
    if a.format == Format::Raw && a.output.is_none() {
        return Err(Failure::Usage("--format raw requires --output".into()));
    }
    let count = a.count as usize;
    let (seed, seed_generated) = match a.seed {
        Some(s) => (s, false),
        None => (rand::random::<u64>(), true),
    };
    let h = HurstParameter::new(a.h)?;
    let embedding = CirculantEmbedding::new(h, n)?;
    let series = with_threads(a.threads, || embedding.sample_batch(seed, 0, count))??;
    let spacing = a.horizon / n as f64;
    let (times, columns): (Vec<f64>, Vec<Vec<f64>>) = if a.noise {
        let scale = spacing.powf(a.h);
        (
            (1..=n).map(|k| k as f64 * spacing).collect(),
            series
                .iter()
                .map(|x| x.values.iter().map(|v| scale * v).collect())
                .collect(),
        )
    } else {
        let paths = series
            .iter()
            .map(|x| fgn_to_fbm(x, a.horizon))
            .collect::<crate::Result<Vec<_>>>()?;
        let times = paths[0].times.clone();
        (times, paths.into_iter().map(|p| p.values).collect())
    };
    let meta = Metadata {
        library: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: if a.noise {
            SeriesKind::Fgn
        } else {
            SeriesKind::Fbm
        },
        hurst: a.h,
        n,
        q: grid_exponent(n),
        points: times.len(),
        count,
        horizon: a.horizon,
        spacing,
        seed,
        seed_generated,
        format: a.format,
        rng: io::RNG_DESCRIPTION.into(),
    };
    match &a.output {
        None => {
            io::write_csv(&mut *out, &times, &columns)?;
            if seed_generated {
                let _ = writeln!(err, "seed: {seed}");
            }
        }
        Some(path) => {
            let file = File::create(path).map_err(|e| io::io_error(path, e))?;
            let w = BufWriter::new(file);
            match a.format {
                Format::Csv => io::write_csv(w, &times, &columns),
                Format::Raw => io::write_raw(w, &columns),
            }
            .map_err(|e| io::io_error(path, e))?;
            io::write_metadata(path, &meta)?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SeriesReport {
    name: String,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    estimate: Option<EstimateResult<f64>>,
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    input: String,
    filter: String,
    dilations: Vec<usize>,
    ci_level: Option<f64>,
    mc_reps: Option<usize>,
    seed: u64,
    series: Vec<SeriesReport>,
}

fn estimate(a: &EstimateArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CmdResult {
    let config = EstimatorConfig::new(Filter::named(a.filter), a.dilations.clone())
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if a.ci.is_some() && a.mc_reps < MIN_MC_REPS {
        return Err(Failure::Usage(format!(
            "--mc-reps must be at least {MIN_MC_REPS}"
        )));
    }
    let table = io::read_series_file(&a.input, a.format)?;
    let series = with_threads(a.threads, || {
        table
            .columns
            .iter()
            .enumerate()
            .map(|(i, x)| match a.ci {
                Some(level) => {
                    estimate_with_ci(x, &config, level, a.mc_reps, derive_seed(a.seed, i as u64))
                }
                None => estimate_hurst(x, &config),
            })
            .collect::<Vec<_>>()
    })?;
    let report = EstimateReport {
        input: a.input.display().to_string(),
        filter: a.filter.to_string(),
        dilations: a.dilations.clone(),
        ci_level: a.ci,
        mc_reps: a.ci.map(|_| a.mc_reps),
        seed: a.seed,
        series: table
            .names
            .iter()
            .zip(series)
            .map(|(name, r)| match r {
                Ok(est) => SeriesReport {
                    name: name.clone(),
                    ok: true,
                    error: None,
                    estimate: Some(est),
                },
                Err(e) => SeriesReport {
                    name: name.clone(),
                    ok: false,
                    error: Some(e.to_string()),
                    estimate: None,
                },
            })
            .collect(),
    };
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &report)
            .map_err(|e| Failure::Data(e.to_string()))?;
        writeln!(out)?;
    } else {
        write_estimate_text(out, &report)?;
    }
    if report.series.iter().all(|s| !s.ok) {
        return Err(Failure::Data("no series could be estimated".into()));
    }
    Ok(())
}

fn write_estimate_text(out: &mut dyn Write, report: &EstimateReport) -> std::io::Result<()> {
    writeln!(
        out,
        "filter {}, dilations {:?}",
        report.filter, report.dilations
    )?;
    for s in &report.series {
        match (&s.estimate, &s.error) {
            (Some(e), _) => {
                let flag = if e.in_model_range {
                    ""
                } else {
                    "  (outside (0, 1))"
                };
                writeln!(
                    out,
                    "{}: H_hat = {:.6}  n = {}{flag}",
                    s.name, e.h_hat, e.n_used
                )?;
                writeln!(out, "  {:>4}  {:>14}  {:>10}", "m", "V", "log V")?;
                for row in &e.per_dilation {
                    writeln!(out, "  {:>4}  {:>14.6e}  {:>10.6}", row.m, row.v, row.log_v)?;
                }
                if let Some(ci) = &e.ci {
                    writeln!(
                        out,
                        "  {:.0}% CI [{:.6}, {:.6}]  (bootstrap, {} reps, seed {})",
                        100.0 * ci.level,
                        ci.lower,
                        ci.upper,
                        ci.mc_reps,
                        ci.seed
                    )?;
                }
            }
            (None, Some(msg)) => writeln!(out, "{}: error: {msg}", s.name)?,
            (None, None) => unreachable!("series report without estimate or error"),
        }
    }
    Ok(())
}

fn run_verify(a: &VerifyArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CmdResult {
    if a.mc_reps < MIN_MC_REPS {
        return Err(Failure::Usage(format!(
            "--mc-reps must be at least {MIN_MC_REPS}"
        )));
    }
    let suites: Vec<Suite> = if a.only.is_empty() {
        Suite::ALL.to_vec()
    } else {
        a.only.clone()
    };
    let mut opts = VerifyOptions {
        mc_reps: a.mc_reps,
        ..VerifyOptions::default()
    };
    if let Some(seed) = a.seed {
        opts.seed = seed;
    }
    let checks = verify::run(&suites, opts);
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &checks)
            .map_err(|e| Failure::Data(e.to_string()))?;
        writeln!(out)?;
    } else {
        for c in &checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            writeln!(
                out,
                "{status}  {:<15} {:<40} {}",
                c.suite.as_str(),
                c.name,
                c.detail
            )?;
        }
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.suite.as_str(), c.name))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{} check(s) failed: {}",
            failed.len(),
            failed.join("; ")
        )))
    }
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub embedding_size: usize,
    pub build_seconds: f64,
    pub paths_timed: usize,
    pub seconds_per_path: f64,
    pub seconds_per_point: f64,
    pub cholesky_factor_seconds: Option<f64>,
    pub cholesky_seconds_per_path: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub grid: Vec<BenchRow>,
    /// Same sampler at `N = 1500` (FFT length 2998) and `N = 2049`
    /// (FFT length 4096).
    pub non_power_of_two: BenchRow,
    pub power_of_two: BenchRow,
}

/// Runs `f` repeatedly until `min_time` has elapsed; returns the number of
/// calls and the mean time per call.
fn time_repeated(min_time: f64, mut f: impl FnMut()) -> (usize, f64) {
    let start = Instant::now();
    let mut calls = 0;
    while calls == 0 || start.elapsed().as_secs_f64() < min_time {
        f();
        calls += 1;
    }
    (calls, start.elapsed().as_secs_f64() / calls as f64)
}

pub fn bench_row(n: usize, min_time: f64, with_cholesky: bool) -> crate::Result<BenchRow> {
    let h = HurstParameter::new(0.7)?;
    let start = Instant::now();
    let embedding = CirculantEmbedding::new(h, n)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let mut index = 0;
    let (paths_timed, per_path) = time_repeated(min_time, || {
        std::hint::black_box(embedding.sample_path(&mut path_rng(1, index)));
        index += 1;
    });
    let (factor, chol_path) = if with_cholesky && n <= CHOLESKY_MAX_N {
        let start = Instant::now();
        let l = CholeskyFactor::new(h, n)?;
        let factor = start.elapsed().as_secs_f64();
        let mut index = 0;
        let (_, per_path) = time_repeated(min_time, || {
            std::hint::black_box(l.sample_path(&mut path_rng(1, index)));
            index += 1;
        });
        (Some(factor), Some(per_path))
    } else {
        (None, None)
    };
    Ok(BenchRow {
        n,
        embedding_size: embedding.embedding_size(),
        build_seconds,
        paths_timed,
        seconds_per_path: per_path,
        seconds_per_point: per_path / n as f64,
        cholesky_factor_seconds: factor,
        cholesky_seconds_per_path: chol_path,
    })
}

fn bench(a: &BenchArgs, out: &mut dyn Write) -> CmdResult {
    if a.min_q > a.max_q {
        return Err(Failure::Usage("--min-q must not exceed --max-q".into()));
    }
    let grid = (a.min_q..=a.max_q)
        .map(|q| bench_row((1usize << q) + 1, a.min_time, true))
        .collect::<crate::Result<Vec<_>>>()?;
    let report = BenchReport {
        grid,
        non_power_of_two: bench_row(1500, a.min_time, false)?,
        power_of_two: bench_row(2049, a.min_time, false)?,
    };
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &report)
            .map_err(|e| Failure::Data(e.to_string()))?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(
        out,
        "{:>7} {:>7} {:>11} {:>13} {:>13} {:>13} {:>13}",
        "N", "M", "build s", "s/path", "s/point", "chol fac s", "chol s/path"
    )?;
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3e}"));
    for r in &report.grid {
        writeln!(
            out,
            "{:>7} {:>7} {:>11.3e} {:>13.3e} {:>13.3e} {:>13} {:>13}",
            r.n,
            r.embedding_size,
            r.build_seconds,
            r.seconds_per_path,
            r.seconds_per_point,
            opt(r.cholesky_factor_seconds),
            opt(r.cholesky_seconds_per_path)
        )?;
    }
    let (a1, b1) = (&report.non_power_of_two, &report.power_of_two);
    writeln!(
        out,
        "N = {} (M = {}): {:.3e} s/path, {:.3e} s/point",
        a1.n, a1.embedding_size, a1.seconds_per_path, a1.seconds_per_point
    )?;
    writeln!(
        out,
        "N = {} (M = {}): {:.3e} s/path, {:.3e} s/point",
        b1.n, b1.embedding_size, b1.seconds_per_path, b1.seconds_per_point
    )?;
    Ok(())
}
