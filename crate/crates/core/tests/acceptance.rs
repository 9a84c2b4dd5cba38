//! Acceptance criteria, run as a plain binary so every criterion prints one
//! PASS/FAIL line regardless of the test harness's output capture.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use fbmkit::circulant::{fgn_to_fbm, CholeskyFactor, CirculantEmbedding};
use fbmkit::cov::{fbm_covariance, fgn_autocovariance_at, HurstParameter};
use fbmkit::filters::{Filter, FilterName};
use fbmkit::hurst::{estimate_hurst, normality_diagnostic, EstimatorConfig};
use fbmkit::kernels::{
    ha_constant, ma_constant, volterra_beta_identity_check, KernelKind, Kernels, QuadratureSpec,
    VolterraVariant, VOLTERRA_LOW_H_VARIANT,
};
use fbmkit::rng::{derive_seed, fill_standard_normal, path_rng};
use fbmkit::verify::mean_abs_error;
use rayon::prelude::*;

/// Fixed before any Monte Carlo criterion was run.
const SEED: u64 = 20_261_016;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn hp(h: f64) -> HurstParameter<f64> {
    HurstParameter::new(h).unwrap()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn embedding_exactness() -> Outcome {
    let n = (1 << 10) + 1;
    let (mut min_lambda, mut round_trip, mut cov) = (f64::INFINITY, 0.0f64, 0.0f64);
    for i in 1..=9 {
        let h = hp(i as f64 / 10.0);
        let e = CirculantEmbedding::new(h, n).map_err(|e| e.to_string())?;
        min_lambda = e.eigenvalues().iter().copied().fold(min_lambda, f64::min);
        let row = e.recover_row();
        for (k, (r, c)) in row.iter().zip(e.circulant_row()).enumerate() {
            round_trip = round_trip.max((r - c).abs());
            if k < n {
                cov = cov.max((r - fgn_autocovariance_at(h, k)).abs());
            }
        }
    }
    ensure(
        min_lambda >= 0.0 && round_trip <= 1e-10 && cov <= 1e-10,
        format!(
            "min lambda {min_lambda:.3e}, round trip {round_trip:.1e}, |c_k - rho(k)| {cov:.1e}"
        ),
    )
}

/// Unbiased sample covariance matrix of the rows of `paths`.
fn sample_covariance(paths: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = paths[0].len();
    let count = paths.len() as f64;
    let means: Vec<f64> = (0..n)
        .map(|i| paths.iter().map(|p| p[i]).sum::<f64>() / count)
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    paths
                        .iter()
                        .map(|p| (p[i] - means[i]) * (p[j] - means[j]))
                        .sum::<f64>()
                        / (count - 1.0)
                })
                .collect()
        })
        .collect()
}

fn sampler_vs_oracle() -> Outcome {
    let (n, count) = (64, 10_000);
    let mut lines = Vec::new();
    let mut ok = true;
    for h in [0.3, 0.5, 0.7] {
        let e = CirculantEmbedding::new(hp(h), n).map_err(|e| e.to_string())?;
        let circ: Vec<Vec<f64>> = e
            .sample_batch(derive_seed(SEED, 2), 0, count)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|s| s.values)
            .collect();
        let l = CholeskyFactor::new(hp(h), n).map_err(|e| e.to_string())?;
        let chol: Vec<Vec<f64>> = (0..count as u64)
            .into_par_iter()
            .map(|i| l.sample_path(&mut path_rng(derive_seed(SEED, 3), i)).values)
            .collect();
        let a = sample_covariance(&circ);
        let b = sample_covariance(&chol);
        let (mut pair, mut exact) = (0.0f64, 0.0f64);
        for i in 0..n {
            for j in 0..n {
                let c = fgn_autocovariance_at(hp(h), i.abs_diff(j));
                pair = pair.max((a[i][j] - b[i][j]).abs());
                exact = exact.max((a[i][j] - c).abs()).max((b[i][j] - c).abs());
            }
        }
        ok &= pair <= 0.05 && exact <= 0.05;
        lines.push(format!(
            "H={h}: |circ-chol| {pair:.4}, |sample-exact| {exact:.4}"
        ));
    }
    ensure(ok, lines.join("; "))
}

fn terminal_variance() -> Outcome {
    let e = CirculantEmbedding::new(hp(0.7), (1 << 10) + 1).map_err(|e| e.to_string())?;
    let terminal: Vec<f64> = e
        .sample_batch(derive_seed(SEED, 4), 0, 10_000)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|x| fgn_to_fbm(x, 1.0).unwrap().terminal())
        .collect();
    let count = terminal.len() as f64;
    let mean = terminal.iter().sum::<f64>() / count;
    let var = terminal
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (count - 1.0);
    ensure(
        (var - 1.0).abs() <= 0.05,
        format!("sample Var(B_1) = {var:.4}"),
    )
}

fn constants() -> Outcome {
    let mut worst_ma = 0.0f64;
    let mut worst_ha = 0.0f64;
    for h in [0.3, 0.6, 0.8] {
        let ma = ma_constant(hp(h)).map_err(|e| e.to_string())?;
        worst_ma = worst_ma.max((ma.closed_form - ma.integral).abs());
        let ha = ha_constant(hp(h)).map_err(|e| e.to_string())?;
        worst_ha = worst_ha.max((ha.integral_closed - ha.integral_quadrature).abs());
    }
    let ma_half = ma_constant(hp(0.5)).map_err(|e| e.to_string())?;
    let ha_half = ha_constant(hp(0.5)).map_err(|e| e.to_string())?;
    let ma_err = (ma_half.closed_form - 1.0)
        .abs()
        .max((ma_half.integral - 1.0).abs());
    let ha_err = (ha_half.value - 1.0 / std::f64::consts::PI.sqrt()).abs();
    ensure(
        worst_ma <= 1e-6 && worst_ha <= 1e-4 && ma_err <= 1e-12 && ha_err <= 1e-6,
        format!("K_MA two ways {worst_ma:.1e}, I(H) {worst_ha:.1e}, K_MA(1/2) {ma_err:.1e}, K_Ha(1/2) {ha_err:.1e}"),
    )
}

fn grid_error(k: &Kernels, kind: KernelKind, q: &QuadratureSpec) -> Result<f64, String> {
    let times = [0.5, 1.0, 2.0];
    let mut worst = 0.0f64;
    for t in times {
        for s in times {
            let got = k.inner_product(kind, t, s, q).map_err(|e| e.to_string())?;
            let want = fbm_covariance(k.hurst(), t, s).map_err(|e| e.to_string())?;
            worst = worst.max((got - want).abs());
        }
    }
    Ok(worst)
}

fn kernel_reproduction() -> Outcome {
    let q = QuadratureSpec::default();
    let mut worst = 0.0f64;
    for h in [0.3, 0.6, 0.8] {
        let k = Kernels::new(hp(h));
        for kind in KernelKind::ALL {
            worst = worst.max(grid_error(&k, kind, &q)?);
        }
    }
    let mut passing = Vec::new();
    for variant in [VolterraVariant::Standard, VolterraVariant::AsPrinted] {
        let k = Kernels::with_variant(hp(0.3), variant);
        if grid_error(&k, KernelKind::Volterra, &q)? <= 1e-2 {
            passing.push(variant);
        }
    }
    ensure(
        worst <= 1e-2 && passing.contains(&VOLTERRA_LOW_H_VARIANT),
        format!("max error {worst:.1e}; passing H<1/2 Volterra variants {passing:?}, frozen {VOLTERRA_LOW_H_VARIANT:?}"),
    )
}

fn beta_identity() -> Outcome {
    let mut worst = 0.0f64;
    for (h, u, v) in [(0.75, 1.0, 2.0), (0.6, 0.5, 3.0), (0.9, 1.0, 1.5)] {
        let (num, closed) = volterra_beta_identity_check(hp(h), u, v).map_err(|e| e.to_string())?;
        worst = worst.max(((num - closed) / closed).abs());
    }
    ensure(worst <= 1e-6, format!("max relative error {worst:.1e}"))
}

fn estimator_consistency() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for h in [0.3, 0.5, 0.7] {
        let seed = derive_seed(SEED, 7);
        let small = mean_abs_error(h, (1 << 12) + 1, 200, seed).map_err(|e| e.to_string())?;
        let large = mean_abs_error(h, (1 << 13) + 1, 200, seed).map_err(|e| e.to_string())?;
        ok &= small <= 0.03 && large < small;
        lines.push(format!("H={h}: {small:.4} -> {large:.4}"));
    }
    ensure(
        ok,
        format!("mean |H_hat - H|, N=4097 -> 8193: {}", lines.join(", ")),
    )
}

fn scale_invariance() -> Outcome {
    let cfg = EstimatorConfig::named(FilterName::Increments2, vec![1, 2, 3, 4])
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..50 {
        let mut x = vec![0.0; 1000];
        fill_standard_normal(&mut path_rng(derive_seed(SEED, 8), i), &mut x);
        let base = estimate_hurst(&x, &cfg).map_err(|e| e.to_string())?.h_hat;
        for c in [1e-6, 1.0, 1e6] {
            let y: Vec<f64> = x.iter().map(|v| c * v).collect();
            let h = estimate_hurst(&y, &cfg).map_err(|e| e.to_string())?.h_hat;
            worst = worst.max((h - base).abs());
        }
    }
    ensure(worst <= 1e-12, format!("max |difference| {worst:.1e}"))
}

fn asymptotic_normality() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (h, name) in [
        (0.6, FilterName::Increments1),
        (0.8, FilterName::Increments2),
    ] {
        let r = normality_diagnostic(
            hp(h),
            &Filter::named(name),
            1,
            1 << 12,
            2000,
            derive_seed(SEED, 9),
        )
        .map_err(|e| e.to_string())?;
        ok &= r.pass && !r.hypothesis_violated;
        lines.push(format!(
            "H={h} {name}: A2*={:.3} p={:.3}",
            r.statistic, r.p_value
        ));
    }
    let flagged = normality_diagnostic(
        hp(0.85),
        &Filter::named(FilterName::Increments1),
        1,
        1 << 12,
        2000,
        SEED,
    )
    .map_err(|e| e.to_string())?
    .hypothesis_violated;
    ok &= flagged;
    lines.push(format!("H=0.85 increments1 flagged: {flagged}"));
    ensure(ok, lines.join("; "))
}

fn fbm(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fbm"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "fbm {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| e.to_string())
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for (run, threads) in [(0, "1"), (1, "1"), (2, "4"), (3, "4")] {
        for format in ["csv", "raw"] {
            let path = dir.path().join(format!("run{run}.{format}"));
            let p = path.to_str().unwrap();
            fbm(&[
                "simulate",
                "--h",
                "0.7",
                "--q",
                "10",
                "--count",
                "8",
                "--seed",
                "42",
                "--format",
                format,
                "--threads",
                threads,
                "--output",
                p,
            ])?;
            files.push((
                format,
                read(&path)?,
                read(&fbmkit::io::sidecar_path(&path))?,
            ));
        }
    }
    let same_files = files.iter().all(|(f, data, meta)| {
        files
            .iter()
            .filter(|(g, _, _)| g == f)
            .all(|(_, d, m)| d == data && m == meta)
    });
    let input = dir.path().join("run0.csv");
    let input = input.to_str().unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "1", "4", "4"] {
        reports.push(fbm(&[
            "estimate",
            "--input",
            input,
            "--ci",
            "0.95",
            "--mc-reps",
            "200",
            "--seed",
            "7",
            "--json",
            "--threads",
            threads,
        ])?);
    }
    let same_reports = reports.windows(2).all(|w| w[0] == w[1]);
    ensure(
        same_files && same_reports,
        format!("simulate outputs identical: {same_files}; estimate reports identical: {same_reports} (workers 1 and 4, two runs each)"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 embedding exactness", embedding_exactness),
        ("2 sampler vs Cholesky oracle", sampler_vs_oracle),
        ("3 terminal variance", terminal_variance),
        ("4 constants", constants),
        ("5 kernel covariance reproduction", kernel_reproduction),
        ("6 beta identity", beta_identity),
        ("7 estimator consistency", estimator_consistency),
        ("8 exact scale invariance", scale_invariance),
        ("9 asymptotic normality", asymptotic_normality),
        ("10 reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<34} {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<34} {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
