//! Small sample statistics used by the Monte Carlo procedures.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// `(ln Phi(z), ln(1 - Phi(z)))` without cancellation in either tail.
fn log_normal_cdfs(z: f64) -> (f64, f64) {
    let lower = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let upper = 0.5 * erfc(z / std::f64::consts::SQRT_2);
    (lower.ln(), upper.ln())
}

/// Anderson-Darling test of normality with mean and variance estimated from
/// the sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AndersonDarling {
    /// `A^2` of the standardized sample.
    pub a2: f64,
    /// Small-sample adjusted `A^2 (1 + 0.75/n + 2.25/n^2)`.
    pub adjusted: f64,
    /// Approximate p-value of `adjusted`.
    pub p_value: f64,
}

/// Critical values of the adjusted statistic (estimated mean and variance).
pub fn anderson_darling_critical(significance: f64) -> Result<f64> {
    match significance {
        0.10 => Ok(0.631),
        0.05 => Ok(0.752),
        0.025 => Ok(0.873),
        0.01 => Ok(1.035),
        0.005 => Ok(1.159),
        _ => Err(Error::InvalidArgument(format!(
            "no tabulated Anderson-Darling critical value at significance {significance}"
        ))),
    }
}

pub fn anderson_darling_normal(sample: &[f64]) -> Result<AndersonDarling> {
    let n = sample.len();
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "normality test needs at least 8 values, got {n}"
        )));
    }
    let mu = mean(sample);
    let sd = variance(sample).sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariation);
    }
    let mut z: Vec<f64> = sample.iter().map(|x| (x - mu) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let s: f64 = (0..n)
        .map(|i| {
            let (ln_lo, _) = log_normal_cdfs(z[i]);
            let (_, ln_up) = log_normal_cdfs(z[n - 1 - i]);
            (2.0 * i as f64 + 1.0) * (ln_lo + ln_up)
        })
        .sum();
    let a2 = -nf - s / nf;
    let adjusted = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    Ok(AndersonDarling {
        a2,
        adjusted,
        p_value: anderson_darling_p_value(adjusted),
    })
}

/// D'Agostino-Stephens approximation of the upper tail probability.
fn anderson_darling_p_value(a: f64) -> f64 {
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn type_seven_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 5.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert!((quantile_sorted(&xs, 0.1) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn anderson_darling_reference() {
        // scipy.stats.anderson(x, 'norm').statistic
        let x = [
            -1.2, -0.8, -0.5, -0.3, -0.1, 0.0, 0.2, 0.35, 0.6, 0.9, 1.4, 2.1,
        ];
        let ad = anderson_darling_normal(&x).unwrap();
        assert!((ad.a2 - 0.153_907_612_425_475_9).abs() < 1e-10, "{}", ad.a2);
    }

    #[test]
    fn anderson_darling_rejects_uniform_grid_of_exponentials() {
        let x: Vec<f64> = (1..=400)
            .map(|i| -(1.0 - i as f64 / 401.0f64).ln())
            .collect();
        let ad = anderson_darling_normal(&x).unwrap();
        assert!(ad.adjusted > anderson_darling_critical(0.01).unwrap());
        assert!(ad.p_value < 0.01);
    }

    #[test]
    fn p_value_at_critical_points() {
        assert!((anderson_darling_p_value(1.035) - 0.01).abs() < 1e-3);
        assert!((anderson_darling_p_value(0.752) - 0.05).abs() < 3e-3);
    }
}
