//! Self-checks run by `fbm verify`: deterministic identities plus Monte
//! Carlo checks whose tolerances are set from the replicate count.

use rayon::prelude::*;
use serde::Serialize;

use crate::circulant::{CholeskyFactor, CirculantEmbedding};
use crate::cov::{fbm_covariance, fgn_autocovariance_at, HurstParameter};
use crate::error::Result;
use crate::filters::{Filter, FilterName};
use crate::hurst::{
    estimate_hurst, estimate_with_ci, normality_diagnostic, simulate_observations, EstimatorConfig,
};
use crate::kernels::{
    ha_constant, ma_constant, volterra_beta_identity_check, KernelKind, Kernels, QuadratureSpec,
    VolterraVariant, VOLTERRA_LOW_H_VARIANT,
};
use crate::rng::{derive_seed, fill_standard_normal, path_rng};
use crate::stats::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Embedding,
    Sampler,
    Terminal,
    Constants,
    Kernels,
    Beta,
    Estimator,
    Scale,
    Normality,
    Reproducibility,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Embedding,
        Suite::Sampler,
        Suite::Terminal,
        Suite::Constants,
        Suite::Kernels,
        Suite::Beta,
        Suite::Estimator,
        Suite::Scale,
        Suite::Normality,
        Suite::Reproducibility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Embedding => "embedding",
            Suite::Sampler => "sampler",
            Suite::Terminal => "terminal",
            Suite::Constants => "constants",
            Suite::Kernels => "kernels",
            Suite::Beta => "beta",
            Suite::Estimator => "estimator",
            Suite::Scale => "scale",
            Suite::Normality => "normality",
            Suite::Reproducibility => "reproducibility",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub mc_reps: usize,
    pub seed: u64,
}

pub const DEFAULT_VERIFY_REPS: usize = 2000;

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            mc_reps: DEFAULT_VERIFY_REPS,
            seed: 20_240_601,
        }
    }
}

/// Standardized deviation allowed for a maximum over many matrix entries.
const MAX_Z: f64 = 5.0;

fn check(suite: Suite, name: impl Into<String>, outcome: Result<(bool, String)>) -> Check {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        suite,
        name: name.into(),
        passed,
        detail,
    }
}

fn hp(h: f64) -> HurstParameter<f64> {
    HurstParameter::new(h).expect("valid literal")
}

pub fn run(suites: &[Suite], opts: VerifyOptions) -> Vec<Check> {
    suites.iter().flat_map(|&s| run_suite(s, opts)).collect()
}

pub fn run_suite(suite: Suite, opts: VerifyOptions) -> Vec<Check> {
    match suite {
        Suite::Embedding => embedding(),
        Suite::Sampler => sampler(opts),
        Suite::Terminal => terminal(opts),
        Suite::Constants => constants(),
        Suite::Kernels => kernels(),
        Suite::Beta => beta(),
        Suite::Estimator => estimator(opts),
        Suite::Scale => scale(opts),
        Suite::Normality => normality(opts),
        Suite::Reproducibility => reproducibility(opts),
    }
}

/// Largest eigenvalue, round-trip error and covariance mismatch of the
/// embedding for one `(H, N)`.
pub fn embedding_errors(h: HurstParameter<f64>, n: usize) -> Result<(f64, f64, f64)> {
    let e = CirculantEmbedding::new(h, n)?;
    let min_lambda = e
        .eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let row = e.recover_row();
    let round_trip = row
        .iter()
        .zip(e.circulant_row())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let cov = (0..n)
        .map(|k| (row[k] - fgn_autocovariance_at(h, k)).abs())
        .fold(0.0, f64::max);
    Ok((min_lambda, round_trip, cov))
}

fn embedding() -> Vec<Check> {
    (1..=9)
        .map(|i| {
            let h = i as f64 / 10.0;
            check(Suite::Embedding, format!("H={h} N=1025"), {
                embedding_errors(hp(h), 1025).map(|(min, rt, cov)| {
                    (
                        min >= 0.0 && rt <= 1e-10 && cov <= 1e-10,
                        format!("min lambda {min:.3e}, round trip {rt:.1e}, c_k vs rho {cov:.1e}"),
                    )
                })
            })
        })
        .collect()
}

/// Sample second moments `(1/n) sum x x^T` of `n` zero-mean series.
pub fn second_moments(paths: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = paths[0].len();
    let inv = 1.0 / paths.len() as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| paths.iter().map(|p| p[i] * p[j]).sum::<f64>() * inv)
                .collect()
        })
        .collect()
}

pub fn circulant_paths(
    h: HurstParameter<f64>,
    n: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    let e = CirculantEmbedding::new(h, n)?;
    Ok(e.sample_batch(seed, 0, count)?
        .into_iter()
        .map(|s| s.values)
        .collect())
}

pub fn cholesky_paths(
    h: HurstParameter<f64>,
    n: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    let l = CholeskyFactor::new(h, n)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| l.sample_path(&mut path_rng(seed, i)).values)
        .collect())
}

fn sampler(opts: VerifyOptions) -> Vec<Check> {
    let n = 32;
    let reps = opts.mc_reps;
    [0.3, 0.5, 0.7]
        .into_iter()
        .map(|h| {
            check(Suite::Sampler, format!("H={h} N={n} paths={reps}"), {
                (|| {
                    let a = second_moments(&circulant_paths(hp(h), n, derive_seed(opts.seed, 1), reps)?);
                    let b = second_moments(&cholesky_paths(hp(h), n, derive_seed(opts.seed, 2), reps)?);
                    let (mut z_pair, mut z_exact) = (0.0f64, 0.0f64);
                    for i in 0..n {
                        for j in 0..n {
                            let c = fgn_autocovariance_at(hp(h), i.abs_diff(j));
                            let sd = ((1.0 + c * c) / reps as f64).sqrt();
                            z_pair = z_pair.max((a[i][j] - b[i][j]).abs() / (sd * 2f64.sqrt()));
                            z_exact = z_exact.max((a[i][j] - c).abs() / sd).max((b[i][j] - c).abs() / sd);
                        }
                    }
                    Ok((
                        z_pair <= MAX_Z && z_exact <= MAX_Z,
                        format!("max |z| circulant vs cholesky {z_pair:.2}, vs exact {z_exact:.2} (limit {MAX_Z})"),
                    ))
                })()
            })
        })
        .collect()
}

fn terminal(opts: VerifyOptions) -> Vec<Check> {
    let reps = opts.mc_reps;
    vec![check(
        Suite::Terminal,
        format!("H=0.7 T=1 N=1025 paths={reps}"),
        {
            (|| {
                let e = CirculantEmbedding::new(hp(0.7), 1025)?;
                let terminal: Vec<f64> = e
                    .sample_batch(derive_seed(opts.seed, 3), 0, reps)?
                    .iter()
                    .map(|x| crate::circulant::fgn_to_fbm(x, 1.0).map(|p| p.terminal()))
                    .collect::<Result<_>>()?;
                let var = terminal.iter().map(|x| x * x).sum::<f64>() / reps as f64;
                let tol = 4.0 * (2.0 / reps as f64).sqrt();
                Ok((
                    (var - 1.0).abs() <= tol,
                    format!("Var B_T = {var:.4} (target 1 +- {tol:.3})"),
                ))
            })()
        },
    )]
}

fn constants() -> Vec<Check> {
    let mut out = Vec::new();
    for h in [0.3, 0.6, 0.8] {
        out.push(check(
            Suite::Constants,
            format!("K_MA two ways H={h}"),
            ma_constant(hp(h)).map(|c| {
                let d = (c.closed_form - c.integral).abs();
                (d <= 1e-6, format!("|closed - integral| = {d:.1e}"))
            }),
        ));
        out.push(check(
            Suite::Constants,
            format!("I(H) quadrature H={h}"),
            ha_constant(hp(h)).map(|c| {
                let d = (c.integral_closed - c.integral_quadrature).abs();
                (d <= 1e-4, format!("|closed - quadrature| = {d:.1e}"))
            }),
        ));
    }
    out.push(check(
        Suite::Constants,
        "K_MA(1/2) = 1",
        ma_constant(hp(0.5)).map(|c| {
            (
                (c.closed_form - 1.0).abs() <= 1e-12,
                format!("{}", c.closed_form),
            )
        }),
    ));
    out.push(check(
        Suite::Constants,
        "K_Ha(1/2) = 1/sqrt(pi)",
        ha_constant(hp(0.5)).map(|c| {
            let d = (c.value - 1.0 / std::f64::consts::PI.sqrt()).abs();
            (d <= 1e-6, format!("{} (error {d:.1e})", c.value))
        }),
    ));
    out
}

/// Largest `|<k_t, k_s> - R(t, s)|` over `(t, s) in {0.5, 1, 2}^2`.
pub fn kernel_grid_error(k: &Kernels, kind: KernelKind, q: &QuadratureSpec) -> Result<f64> {
    let times = [0.5, 1.0, 2.0];
    let mut worst = 0.0f64;
    for t in times {
        for s in times {
            let got = k.inner_product(kind, t, s, q)?;
            worst = worst.max((got - fbm_covariance(k.hurst(), t, s)?).abs());
        }
    }
    Ok(worst)
}

fn kernels() -> Vec<Check> {
    let q = QuadratureSpec::default();
    let mut out = Vec::new();
    for h in [0.3, 0.6, 0.8] {
        let k = Kernels::new(hp(h));
        for kind in KernelKind::ALL {
            out.push(check(
                Suite::Kernels,
                format!("{} H={h}", kind.as_str()),
                kernel_grid_error(&k, kind, &q).map(|e| (e <= 1e-2, format!("max error {e:.1e}"))),
            ));
        }
    }
    let printed = Kernels::with_variant(hp(0.3), VolterraVariant::AsPrinted);
    out.push(check(
        Suite::Kernels,
        format!(
            "volterra H<1/2 variant {:?} selected",
            VOLTERRA_LOW_H_VARIANT
        ),
        kernel_grid_error(&printed, KernelKind::Volterra, &q)
            .map(|e| (e > 1e-2, format!("as-printed variant misses by {e:.2e}"))),
    ));
    out
}

fn beta() -> Vec<Check> {
    [(0.75, 1.0, 2.0), (0.6, 0.5, 3.0), (0.9, 1.0, 1.5)]
        .into_iter()
        .map(|(h, u, v)| {
            check(
                Suite::Beta,
                format!("H={h} u={u} v={v}"),
                volterra_beta_identity_check(hp(h), u, v).map(|(num, closed)| {
                    let rel = ((num - closed) / closed).abs();
                    (rel <= 1e-6, format!("relative error {rel:.1e}"))
                }),
            )
        })
        .collect()
}

/// Mean `|H_hat - H|` over `seeds` simulated paths of length `n`.
pub fn mean_abs_error(h: f64, n: usize, seeds: usize, seed: u64) -> Result<f64> {
    let cfg = EstimatorConfig::named(FilterName::Increments2, vec![1, 2, 3, 4])?;
    let e = CirculantEmbedding::new(hp(h), n)?;
    let errors = simulate_observations(&e, seed, 0, seeds)
        .par_iter()
        .map(|x| estimate_hurst(x, &cfg).map(|r| (r.h_hat - h).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&errors))
}

fn estimator(opts: VerifyOptions) -> Vec<Check> {
    let seeds = (opts.mc_reps / 10).clamp(100, 200);
    [0.3, 0.5, 0.7]
        .into_iter()
        .map(|h| {
            check(
                Suite::Estimator,
                format!("consistency H={h} seeds={seeds}"),
                {
                    (|| {
                        let seed = derive_seed(opts.seed, 4);
                        let small = mean_abs_error(h, (1 << 12) + 1, seeds, seed)?;
                        let large = mean_abs_error(h, (1 << 13) + 1, seeds, seed)?;
                        Ok((
                            small <= 0.03 && large < small,
                            format!("mean |error| {small:.4} at N=4097, {large:.4} at N=8193"),
                        ))
                    })()
                },
            )
        })
        .collect()
}

fn scale(opts: VerifyOptions) -> Vec<Check> {
    vec![check(Suite::Scale, "50 series, c in {1e-6, 1, 1e6}", {
        (|| {
            let cfg = EstimatorConfig::named(FilterName::Increments2, vec![1, 2, 3, 4])?;
            let mut worst = 0.0f64;
            for i in 0..50u64 {
                let mut x = vec![0.0; 200];
                fill_standard_normal(&mut path_rng(derive_seed(opts.seed, 5), i), &mut x);
                let base = estimate_hurst(&x, &cfg)?.h_hat;
                for c in [1e-6, 1.0, 1e6] {
                    let y: Vec<f64> = x.iter().map(|v| c * v).collect();
                    worst = worst.max((estimate_hurst(&y, &cfg)?.h_hat - base).abs());
                }
            }
            Ok((worst <= 1e-12, format!("max difference {worst:.1e}")))
        })()
    })]
}

fn normality(opts: VerifyOptions) -> Vec<Check> {
    let reps = opts.mc_reps;
    let mut out: Vec<Check> = [
        (0.6, FilterName::Increments1),
        (0.8, FilterName::Increments2),
    ]
    .into_iter()
    .map(|(h, name)| {
        check(
            Suite::Normality,
            format!("H={h} {name} N=4096 reps={reps}"),
            normality_diagnostic(
                hp(h),
                &Filter::named(name),
                1,
                1 << 12,
                reps,
                derive_seed(opts.seed, 6),
            )
            .map(|r| {
                (
                    r.pass && !r.hypothesis_violated,
                    format!(
                        "A2* = {:.3} (critical {:.3}), p = {:.3}",
                        r.statistic, r.critical_value, r.p_value
                    ),
                )
            }),
        )
    })
    .collect();
    out.push(check(
        Suite::Normality,
        "H=0.85 increments1 flagged",
        normality_diagnostic(
            hp(0.85),
            &Filter::named(FilterName::Increments1),
            1,
            1 << 10,
            100,
            opts.seed,
        )
        .map(|r| {
            (
                r.hypothesis_violated,
                format!("hypothesis_violated = {}", r.hypothesis_violated),
            )
        }),
    ));
    out
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn reproducibility(opts: VerifyOptions) -> Vec<Check> {
    let simulate = || -> Result<Vec<u64>> {
        let e = CirculantEmbedding::new(hp(0.7), 257)?;
        Ok(e.sample_batch(opts.seed, 0, 16)?
            .iter()
            .flat_map(|s| s.values.iter().map(|v| v.to_bits()))
            .collect())
    };
    let estimate = || -> Result<Vec<u64>> {
        let e = CirculantEmbedding::new(hp(0.7), 513)?;
        let x = &simulate_observations(&e, opts.seed, 0, 1)[0];
        let cfg = EstimatorConfig::named(FilterName::Increments2, vec![1, 2, 3, 4])?;
        let r = estimate_with_ci(x, &cfg, 0.95, 100, opts.seed)?;
        let ci = r.ci.expect("interval requested");
        Ok(vec![
            r.h_hat.to_bits(),
            ci.lower.to_bits(),
            ci.upper.to_bits(),
        ])
    };
    vec![
        check(Suite::Reproducibility, "simulate, 1 vs 4 workers", {
            (|| {
                let a = in_pool(1, simulate)?;
                let b = in_pool(4, simulate)?;
                let c = in_pool(4, simulate)?;
                Ok((
                    a == b && b == c,
                    format!("{} values compared bitwise", a.len()),
                ))
            })()
        }),
        check(
            Suite::Reproducibility,
            "estimate with CI, 1 vs 4 workers",
            {
                (|| {
                    let a = in_pool(1, estimate)?;
                    let b = in_pool(4, estimate)?;
                    Ok((
                        a == b,
                        "point estimate and interval compared bitwise".to_string(),
                    ))
                })()
            },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_suites_pass() {
        for suite in [
            Suite::Embedding,
            Suite::Constants,
            Suite::Beta,
            Suite::Scale,
            Suite::Reproducibility,
        ] {
            for c in run_suite(suite, VerifyOptions::default()) {
                assert!(c.passed, "{:?} {}: {}", c.suite, c.name, c.detail);
            }
        }
    }
}
