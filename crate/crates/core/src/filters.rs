//! Variation filters: polynomials `a(x) = sum a_k x^k` with a root of
//! multiplicity `r` at `x = 1`, their dilations `a(x^m)`, and the
//! autocovariance of filtered fBm observations.
//!
//! Coefficients are indexed from zero. Applied to observations
//! `B_1, ..., B_N` a filter of degree `q` yields `N - q` values.

use std::fmt;
use std::str::FromStr;

use crate::cov::HurstParameter;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance on `a^{(j)}(1)` when certifying the order.
pub const ORDER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterName {
    Increments1,
    Daubechies4,
    Increments2,
}

impl FilterName {
    pub const ALL: [FilterName; 3] = [
        FilterName::Increments1,
        FilterName::Daubechies4,
        FilterName::Increments2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterName::Increments1 => "increments1",
            FilterName::Daubechies4 => "daubechies4",
            FilterName::Increments2 => "increments2",
        }
    }
}

impl fmt::Display for FilterName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "increments1" => Ok(FilterName::Increments1),
            "daubechies4" => Ok(FilterName::Daubechies4),
            "increments2" => Ok(FilterName::Increments2),
            _ => Err(Error::UnknownFilter(s.to_string())),
        }
    }
}

/// A certified variation filter. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter<T> {
    coeffs: Vec<T>,
    order: usize,
}

impl<T: Scalar> Filter<T> {
    /// Validates `coeffs` (degree at least one, nonzero leading coefficient)
    /// and certifies the order.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidFilter(format!(
                "need at least two coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidFilter("non-finite coefficient".into()));
        }
        if *coeffs.last().unwrap() == T::zero() {
            return Err(Error::InvalidFilter("leading coefficient is zero".into()));
        }
        let order = validate_order(&coeffs)?;
        Ok(Self { coeffs, order })
    }

    pub fn named(name: FilterName) -> Self {
        make_named_filter(name)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Vanishing-moment order `r`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Polynomial degree `q`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `a(x^m)`: coefficient `a_k` moves to position `k m`.
    pub fn dilate(&self, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidArgument("dilation must be at least 1".into()));
        }
        let mut coeffs = vec![T::zero(); self.degree() * m + 1];
        for (k, &a) in self.coeffs.iter().enumerate() {
            coeffs[k * m] = a;
        }
        Ok(Self {
            coeffs,
            order: self.order,
        })
    }

    /// Convolves the filter with `series`: `out[n] = sum_k a_k series[n + k]`.
    pub fn apply(&self, series: &[T]) -> Result<Vec<T>> {
        let q = self.degree();
        if series.len() <= q {
            return Err(Error::SeriesTooShort {
                len: series.len(),
                degree: q,
            });
        }
        // Dilated filters are mostly zeros; skip them.
        let taps: Vec<(usize, T)> = self
            .coeffs
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, a)| *a != T::zero())
            .collect();
        Ok(series
            .windows(q + 1)
            .map(|w| taps.iter().fold(T::zero(), |acc, &(k, a)| acc + a * w[k]))
            .collect())
    }

    /// `rho_H^a(lag) = -1/2 sum_k sum_j a_k a_j |lag + k - j|^{2H}`.
    ///
    /// Beyond a few filter lengths the double sum cancels catastrophically
    /// (the result decays like `|lag|^{2(H - r)}`), so large lags expand
    /// `|n + d|^{2H}` binomially; moments of order below `2r` vanish.
    pub fn autocovariance(&self, h: HurstParameter<T>, lag: i64) -> T {
        let n = lag.unsigned_abs() as usize;
        let q = self.degree();
        if n > SERIES_LAG_FACTOR * q {
            self.autocovariance_series(h, n)
        } else {
            self.autocovariance_direct(h, lag)
        }
    }

    fn autocovariance_direct(&self, h: HurstParameter<T>, lag: i64) -> T {
        let two_h = h.twice();
        let mut acc = T::zero();
        for (d, w) in self.self_correlation() {
            let x = (lag + d).unsigned_abs();
            if x != 0 {
                acc = acc + w * T::from_u64(x).unwrap().powf(two_h);
            }
        }
        -T::lit(0.5) * acc
    }

    fn autocovariance_series(&self, h: HurstParameter<T>, n: usize) -> T {
        let two_h = h.twice();
        let nf = T::from_usize_lossy(n);
        let weights: Vec<(T, T)> = self
            .self_correlation()
            .into_iter()
            .map(|(d, w)| (T::from_i64(d).unwrap() / nf, w))
            .collect();
        let first = 2 * self.order;
        // binom(2H, p), built up incrementally.
        let mut binom = T::one();
        for p in 0..first {
            binom = binom * (two_h - T::from_usize_lossy(p)) / T::from_usize_lossy(p + 1);
        }
        let mut sum = T::zero();
        let mut quiet = 0;
        for p in first..first + 400 {
            let moment = weights
                .iter()
                .fold(T::zero(), |acc, &(x, w)| acc + w * x.powi(p as i32));
            let term = binom * moment;
            sum = sum + term;
            // Odd moments of a symmetric weight vanish; wait for two quiet terms.
            if term.abs() <= T::epsilon() * T::lit(1e-3) * sum.abs() {
                quiet += 1;
                if quiet == 2 {
                    break;
                }
            } else {
                quiet = 0;
            }
            binom = binom * (two_h - T::from_usize_lossy(p)) / T::from_usize_lossy(p + 1);
        }
        -T::lit(0.5) * nf.powf(two_h) * sum
    }

    /// Pairs `(d, sum_{k - j = d} a_k a_j)` over nonzero weights.
    fn self_correlation(&self) -> Vec<(i64, T)> {
        let q = self.degree() as i64;
        let mut w = vec![T::zero(); (2 * q + 1) as usize];
        for (k, &ak) in self.coeffs.iter().enumerate() {
            if ak == T::zero() {
                continue;
            }
            for (j, &aj) in self.coeffs.iter().enumerate() {
                let idx = (k as i64 - j as i64 + q) as usize;
                w[idx] = w[idx] + ak * aj;
            }
        }
        w.into_iter()
            .enumerate()
            .map(|(i, v)| (i as i64 - q, v))
            .filter(|(_, v)| *v != T::zero())
            .collect()
    }
}

/// Lags beyond this multiple of the degree use the binomial expansion.
const SERIES_LAG_FACTOR: usize = 16;

/// Builds one of the standard variation filters.
pub fn make_named_filter<T: Scalar>(name: FilterName) -> Filter<T> {
    let coeffs: Vec<T> = match name {
        FilterName::Increments1 => vec![-T::one(), T::one()],
        FilterName::Increments2 => vec![T::one(), -T::lit(2.0), T::one()],
        FilterName::Daubechies4 => {
            // 1/4 (x - 1)(x^2 (1 - sqrt 3) - 2x), expanded in ascending powers.
            let s3 = T::lit(3.0).sqrt();
            let quarter = T::lit(0.25);
            vec![
                T::zero(),
                T::lit(0.5),
                (s3 - T::lit(3.0)) * quarter,
                (T::one() - s3) * quarter,
            ]
        }
    };
    Filter::new(coeffs).expect("named filters are valid")
}

/// Multiplicity of the root of `a(x)` at `x = 1`, certified by evaluating
/// derivatives `a^{(j)}(1) = sum_k a_k k!/(k-j)!`.
pub fn validate_order<T: Scalar>(coeffs: &[T]) -> Result<usize> {
    if coeffs.is_empty() {
        return Err(Error::InvalidFilter("empty coefficient vector".into()));
    }
    let scale = coeffs.iter().fold(T::zero(), |acc, c| acc + c.abs());
    let tol = T::lit(ORDER_TOLERANCE);
    for j in 0..coeffs.len() {
        let mut deriv = T::zero();
        let mut magnitude = T::zero();
        for (k, &a) in coeffs.iter().enumerate().skip(j) {
            let falling = ((k - j + 1)..=k).fold(T::one(), |p, i| p * T::from_usize_lossy(i));
            deriv = deriv + a * falling;
            magnitude = magnitude + a.abs() * falling;
        }
        // Single precision cannot resolve 1e-9; fall back to a rounding bound.
        let tol_j = tol.max(T::epsilon() * T::lit(16.0) * magnitude.max(scale));
        if deriv.abs() > tol_j {
            return if j == 0 { Err(Error::OrderZero) } else { Ok(j) };
        }
    }
    Err(Error::InvalidFilter("zero polynomial".into()))
}

pub fn dilate<T: Scalar>(f: &Filter<T>, m: usize) -> Result<Filter<T>> {
    f.dilate(m)
}

pub fn apply_filter<T: Scalar>(series: &[T], f: &Filter<T>) -> Result<Vec<T>> {
    f.apply(series)
}

pub fn filtered_autocovariance<T: Scalar>(h: HurstParameter<T>, f: &Filter<T>, lag: i64) -> T {
    f.autocovariance(h, lag)
}
