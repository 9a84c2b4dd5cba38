//! Hurst-parameter estimation by discrete variations.
//!
//! For a filter `a` of order `r` and dilation `m`, the empiric variance
//! `V_N^{a^m} = (N - mq)^{-1} sum_k (a^m * B)_k^2` of fBm observations
//! `B_1, ..., B_N` converges to `rho_H^{a^m}(0) = m^{2H} rho_H^a(0)`.
//! Regressing `log V` on `log m` over a set of dilations therefore has slope
//! `2H`. The estimate never uses the sampling step, and rescaling the
//! observations only shifts the intercept.

use rayon::prelude::*;
use serde::Serialize;

use crate::circulant::CirculantEmbedding;
use crate::cov::HurstParameter;
use crate::error::{Error, Result};
use crate::filters::{Filter, FilterName};
use crate::rng::path_rng;
use crate::scalar::Scalar;
use crate::stats::{
    anderson_darling_critical, anderson_darling_normal, mean, quantile_sorted, variance,
};

pub const DEFAULT_MC_REPS: usize = 500;
pub const MIN_MC_REPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig<T> {
    filter: Filter<T>,
    dilations: Vec<usize>,
    /// Informational only: the estimator is scale invariant either way.
    pub assume_unknown_scale: bool,
}

impl<T: Scalar> EstimatorConfig<T> {
    pub fn new(filter: Filter<T>, dilations: Vec<usize>) -> Result<Self> {
        if dilations.iter().any(|&m| m < 1) {
            return Err(Error::InvalidArgument(
                "dilations must be at least 1".into(),
            ));
        }
        let mut sorted = dilations.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != dilations.len() {
            return Err(Error::InvalidArgument("dilations must be distinct".into()));
        }
        if sorted.len() < 2 {
            return Err(Error::InvalidArgument(
                "at least two dilations are required".into(),
            ));
        }
        Ok(Self {
            filter,
            dilations,
            assume_unknown_scale: true,
        })
    }

    pub fn named(name: FilterName, dilations: Vec<usize>) -> Result<Self> {
        Self::new(Filter::named(name), dilations)
    }

    pub fn filter(&self) -> &Filter<T> {
        &self.filter
    }

    pub fn dilations(&self) -> &[usize] {
        &self.dilations
    }

    /// Shortest series the configuration accepts.
    pub fn min_len(&self) -> usize {
        self.filter.degree() * self.dilations.iter().max().copied().unwrap_or(1) + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DilationRow<T> {
    pub m: usize,
    pub v: T,
    pub log_v: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval<T> {
    pub lower: T,
    pub upper: T,
    pub level: f64,
    pub mc_reps: usize,
    pub seed: u64,
    /// Set when the bootstrap quantiles had to be widened to contain the
    /// point estimate.
    pub widened: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult<T> {
    pub h_hat: T,
    pub slope: T,
    pub intercept: T,
    pub per_dilation: Vec<DilationRow<T>>,
    pub ci: Option<ConfidenceInterval<T>>,
    /// Number of observations in the series.
    pub n_used: usize,
    /// Whether `h_hat` lies in `(0, 1)`. Out-of-range estimates are reported
    /// as they are, e.g. `1` for a linear trend.
    pub in_model_range: bool,
}

/// `(N - mq)^{-1} sum_k (a^m * x)_k^2`.
pub fn empiric_variance<T: Scalar>(series: &[T], f: &Filter<T>, m: usize) -> Result<T> {
    let filtered = f.dilate(m)?.apply(series)?;
    let len = T::from_usize_lossy(filtered.len());
    Ok(filtered.iter().map(|&y| y * y).sum::<T>() / len)
}

pub fn estimate_hurst<T: Scalar>(
    series: &[T],
    config: &EstimatorConfig<T>,
) -> Result<EstimateResult<T>> {
    let mut rows = Vec::with_capacity(config.dilations.len());
    for &m in &config.dilations {
        let v = empiric_variance(series, &config.filter, m)?;
        if !(v > T::zero()) || !v.is_finite() {
            return Err(Error::ZeroVariation);
        }
        rows.push(DilationRow {
            m,
            v,
            log_v: v.ln(),
        });
    }
    let xs: Vec<T> = rows.iter().map(|r| T::from_usize_lossy(r.m).ln()).collect();
    let k = T::from_usize_lossy(rows.len());
    let x_bar = xs.iter().copied().sum::<T>() / k;
    let y_bar = rows.iter().map(|r| r.log_v).sum::<T>() / k;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (x, r) in xs.iter().zip(&rows) {
        let dx = *x - x_bar;
        sxy = sxy + dx * (r.log_v - y_bar);
        sxx = sxx + dx * dx;
    }
    let slope = sxy / sxx;
    let h_hat = slope / T::lit(2.0);
    Ok(EstimateResult {
        h_hat,
        slope,
        intercept: y_bar - slope * x_bar,
        per_dilation: rows,
        ci: None,
        n_used: series.len(),
        in_model_range: h_hat > T::zero() && h_hat < T::one(),
    })
}

/// `(1 / 2) log2(V^{d^2} / V^d)` with `d` the first-difference filter,
/// i.e. the regression estimator with dilations `{1, 2}`.
pub fn standard_estimator<T: Scalar>(series: &[T]) -> Result<T> {
    let config = EstimatorConfig::named(FilterName::Increments1, vec![1, 2])?;
    Ok(estimate_hurst(series, &config)?.h_hat)
}

/// Unit-grid fBm observations `B_1, ..., B_n` for paths
/// `first .. first + count` of the batch seeded with `seed`.
pub fn simulate_observations<T: Scalar>(
    embedding: &CirculantEmbedding<T>,
    seed: u64,
    first: u64,
    count: usize,
) -> Vec<Vec<T>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            embedding
                .sample_path(&mut path_rng(seed, first + i))
                .partial_sums()
        })
        .collect()
}

/// Point estimate plus a parametric-bootstrap interval: `mc_reps` series of
/// the same length are simulated at `H = h_hat`, re-estimated, and the
/// empirical `(1 -+ level)/2` quantiles of the replicates form the interval.
/// The interval is widened to contain `h_hat` when necessary.
pub fn estimate_with_ci<T: Scalar>(
    series: &[T],
    config: &EstimatorConfig<T>,
    level: f64,
    mc_reps: usize,
    seed: u64,
) -> Result<EstimateResult<T>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    if mc_reps < MIN_MC_REPS {
        return Err(Error::InvalidArgument(format!(
            "mc_reps must be at least {MIN_MC_REPS}, got {mc_reps}"
        )));
    }
    let mut result = estimate_hurst(series, config)?;
    if !result.in_model_range {
        return Err(Error::EstimateOutOfRange(result.h_hat.to_f64_lossy()));
    }
    let h = HurstParameter::new(result.h_hat)?;
    let embedding = CirculantEmbedding::new(h, series.len())?;
    let replicates: Vec<Result<f64>> = (0..mc_reps as u64)
        .into_par_iter()
        .map(|i| {
            let x = embedding.sample_path(&mut path_rng(seed, i)).partial_sums();
            Ok(estimate_hurst(&x, config)?.h_hat.to_f64_lossy())
        })
        .collect();
    let mut replicates = replicates.into_iter().collect::<Result<Vec<f64>>>()?;
    replicates.sort_by(f64::total_cmp);
    let lower = quantile_sorted(&replicates, (1.0 - level) / 2.0);
    let upper = quantile_sorted(&replicates, (1.0 + level) / 2.0);
    let h_hat = result.h_hat.to_f64_lossy();
    let widened = h_hat < lower || h_hat > upper;
    result.ci = Some(ConfidenceInterval {
        lower: T::lit(lower.min(h_hat)),
        upper: T::lit(upper.max(h_hat)),
        level,
        mc_reps,
        seed,
        widened,
    });
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityReport {
    pub hurst: f64,
    pub order: usize,
    pub dilation: usize,
    pub n: usize,
    pub mc_reps: usize,
    pub seed: u64,
    /// Adjusted Anderson-Darling statistic of the standardized replicates.
    pub statistic: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub significance: f64,
    pub pass: bool,
    /// `H >= 3/4` with an order-one filter: asymptotic normality is not
    /// guaranteed, so a failing test says nothing about the implementation.
    pub hypothesis_violated: bool,
}

pub const NORMALITY_SIGNIFICANCE: f64 = 0.01;

/// Simulates `mc_reps` values of `sqrt(N - mq) (V_N^{a^m} - rho_H^{a^m}(0))`
/// from independent length-`n` fBm observations and tests the standardized
/// sample against the Gaussian.
pub fn normality_diagnostic(
    h: HurstParameter<f64>,
    f: &Filter<f64>,
    m: usize,
    n: usize,
    mc_reps: usize,
    seed: u64,
) -> Result<NormalityReport> {
    let dilated = f.dilate(m)?;
    if n <= dilated.degree() {
        return Err(Error::SeriesTooShort {
            len: n,
            degree: dilated.degree(),
        });
    }
    let target = dilated.autocovariance(h, 0);
    let root_len = ((n - dilated.degree()) as f64).sqrt();
    let embedding = CirculantEmbedding::new(h, n)?;
    let stats: Vec<Result<f64>> = (0..mc_reps as u64)
        .into_par_iter()
        .map(|i| {
            let x = embedding.sample_path(&mut path_rng(seed, i)).partial_sums();
            Ok(root_len * (empiric_variance(&x, f, m)? - target))
        })
        .collect();
    let stats = stats.into_iter().collect::<Result<Vec<f64>>>()?;
    let ad = anderson_darling_normal(&stats)?;
    let critical_value = anderson_darling_critical(NORMALITY_SIGNIFICANCE)?;
    Ok(NormalityReport {
        hurst: h.value(),
        order: f.order(),
        dilation: m,
        n,
        mc_reps,
        seed,
        statistic: ad.adjusted,
        p_value: ad.p_value,
        critical_value,
        significance: NORMALITY_SIGNIFICANCE,
        pass: ad.adjusted < critical_value,
        hypothesis_violated: h.value() >= 0.75 && f.order() == 1,
    })
}

/// Mean and standard deviation of a replicate sample; convenience for
/// Monte Carlo summaries.
pub fn summarize(xs: &[f64]) -> (f64, f64) {
    (mean(xs), variance(xs).sqrt())
}
