//! Closed-form covariance of fractional Brownian motion and of its unit-grid
//! increments (fractional Gaussian noise).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hurst index, validated once to lie strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstParameter<T>(T);

impl<T: Scalar> HurstParameter<T> {
    pub fn new(value: T) -> Result<Self> {
        if value > T::zero() && value < T::one() {
            Ok(Self(value))
        } else {
            Err(Error::HurstOutOfRange(value.to_f64().unwrap_or(f64::NAN)))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// `2H`, the exponent appearing in every covariance formula.
    #[inline]
    pub fn twice(self) -> T {
        self.0 + self.0
    }

    pub fn cast<U: Scalar>(self) -> HurstParameter<U> {
        HurstParameter(U::lit(self.0.to_f64_lossy()))
    }
}

fn check_time<T: Scalar>(name: &str, t: T) -> Result<()> {
    if t >= T::zero() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "time `{name}` must be nonnegative, got {t}"
        )))
    }
}

#[inline]
fn pow2h<T: Scalar>(h: HurstParameter<T>, x: T) -> T {
    // 0^{2H} = 0 for H > 0; powf handles that, abs() keeps callers honest.
    x.abs().powf(h.twice())
}

/// `E[B_t B_s] = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance<T: Scalar>(h: HurstParameter<T>, t: T, s: T) -> Result<T> {
    check_time("t", t)?;
    check_time("s", s)?;
    let half = T::lit(0.5);
    Ok(half * (pow2h(h, t) + pow2h(h, s) - pow2h(h, t - s)))
}

/// `E[(B_{t1} - B_{s1})(B_{t2} - B_{s2})]`.
pub fn increment_covariance<T: Scalar>(
    h: HurstParameter<T>,
    s1: T,
    t1: T,
    s2: T,
    t2: T,
) -> Result<T> {
    check_time("s1", s1)?;
    check_time("t1", t1)?;
    check_time("s2", s2)?;
    check_time("t2", t2)?;
    let half = T::lit(0.5);
    Ok(half * (pow2h(h, t1 - s2) + pow2h(h, t2 - s1) - pow2h(h, t2 - t1) - pow2h(h, s2 - s1)))
}

/// `E[(B_t - B_s)^2] = |t - s|^{2H}`.
pub fn variogram<T: Scalar>(h: HurstParameter<T>, t: T, s: T) -> Result<T> {
    check_time("t", t)?;
    check_time("s", s)?;
    Ok(pow2h(h, t - s))
}

/// Autocovariance of unit-grid fGn at lag `n`, taking the signed lag so that
/// callers working with symmetric sequences need no special casing.
pub fn fgn_autocovariance<T: Scalar>(h: HurstParameter<T>, n: i64) -> Result<T> {
    if n < 0 {
        return Err(Error::Domain(format!("lag must be nonnegative, got {n}")));
    }
    Ok(fgn_autocovariance_at(h, n as usize))
}

/// Infallible form of [`fgn_autocovariance`] for nonnegative lags.
pub fn fgn_autocovariance_at<T: Scalar>(h: HurstParameter<T>, n: usize) -> T {
    if n == 0 {
        return T::one();
    }
    let x = T::from_usize_lossy(n);
    let one = T::one();
    T::lit(0.5) * (pow2h(h, x + one) + pow2h(h, x - one) - (one + one) * pow2h(h, x))
}

/// First `n` autocovariances `rho_H(0), ..., rho_H(n - 1)`.
pub fn fgn_autocovariances<T: Scalar>(h: HurstParameter<T>, n: usize) -> Vec<T> {
    (0..n).map(|k| fgn_autocovariance_at(h, k)).collect()
}
