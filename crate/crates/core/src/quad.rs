//! Globally adaptive Gauss-Kronrod (10/21-point) quadrature with the
//! variable substitutions needed by the representation kernels: power-law
//! maps at integrable endpoint singularities and an algebraic map for
//! power-law tails on half-lines.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Stopping rule for the adaptive driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64, max_subdivisions: usize) -> Self {
        Self {
            abs,
            rel,
            max_subdivisions,
        }
    }

    /// Same budget with a tighter absolute target, for nested integrals.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            abs: self.abs * factor,
            ..self
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-10, 1e-10, 2000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;

    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
            subdivisions: self.subdivisions + rhs.subdivisions,
        }
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        scaled = res_asc * (200.0 * scaled / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One 21-point Kronrod panel with its embedded 10-point Gauss error.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut values = [(0.0, 0.0); 10];
    for (j, slot) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        *slot = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for (j, (f1, f2)) in values.iter().enumerate() {
        res_asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let abs_half = half.abs();
    let err = rescale_error(
        (kronrod - gauss) * half,
        res_abs * abs_half,
        res_asc * abs_half,
    );
    (kronrod * half, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]`, starting from the panels delimited by
/// `breakpoints` (sorted, strictly inside `(a, b)`), bisecting the panel
/// with the largest error until the global target is met.
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let mut edges = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(a);
    edges.extend(
        breakpoints
            .iter()
            .copied()
            .filter(|&x| x > a.min(b) && x < a.max(b)),
    );
    edges.push(b);

    let mut heap = BinaryHeap::new();
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in edges.windows(2) {
        let (value, error) = gk21(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let mut subdivisions = heap.len();
    let mut stalled_err = 0.0;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let target = tol.abs.max(tol.rel * total.abs());
        if total_err <= target {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Panel at the resolution limit; its error cannot shrink.
            stalled_err += worst.error;
            if heap.is_empty() || total_err - stalled_err <= target {
                break;
            }
            continue;
        }
        if subdivisions >= tol.max_subdivisions {
            heap.push(worst);
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    // Recompute from the panels to shed accumulated update rounding.
    let (value, error) = heap
        .iter()
        .fold((0.0, stalled_err), |(v, e), p| (v + p.value, e + p.error));
    Ok(Estimate {
        value,
        error,
        subdivisions,
    })
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    integrate_with_breakpoints(f, a, b, &[], tol)
}

/// Map exponent that flattens an endpoint behaviour `|x - c|^alpha`.
fn power_for(alpha: f64) -> f64 {
    if alpha < 0.0 {
        1.0 / (1.0 + alpha)
    } else {
        1.0
    }
}

/// Integrates over `[a, b]` where `f` behaves like `(x - a)^alpha_a` near
/// `a` and `(b - x)^alpha_b` near `b` (both `> -1`). The interval is split
/// at its midpoint and each half is mapped by `x = end +- h y^p`.
///
/// `f` receives `(x, x - a, b - x)` with the offset to the nearer endpoint
/// computed exactly, so integrands can evaluate their singular factors
/// without cancellation.
pub fn integrate_endpoint_singular<F: Fn(f64, f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    alpha_a: f64,
    alpha_b: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if a >= b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let width = b - a;
    let h = 0.5 * width;
    let half_tol = tol.scaled(0.5);
    let pa = power_for(alpha_a);
    let pb = power_for(alpha_b);
    let jacobian = |p: f64, y: f64, yp: f64| if p == 1.0 { h } else { h * p * yp / y };
    let left = integrate(
        |y: f64| {
            let yp = y.powf(pa);
            let from_a = h * yp;
            jacobian(pa, y, yp) * f(a + from_a, from_a, width - from_a)
        },
        0.0,
        1.0,
        half_tol,
    )?;
    let right = integrate(
        |y: f64| {
            let yp = y.powf(pb);
            let from_b = h * yp;
            jacobian(pb, y, yp) * f(b - from_b, width - from_b, from_b)
        },
        0.0,
        1.0,
        half_tol,
    )?;
    Ok(left + right)
}

/// Integrates over `[a, inf)` for `f(x) ~ x^{-decay}` (`decay > 1`, `a > 0`)
/// through `x = a y^{-kappa}`, `kappa = 1/(decay - 1)`, which turns the
/// power-law tail into a bounded integrand on `(0, 1]`.
pub fn integrate_power_tail<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    decay: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    assert!(
        a > 0.0 && decay > 1.0,
        "power tail needs a > 0 and decay > 1"
    );
    let kappa = 1.0 / (decay - 1.0);
    integrate(
        |y: f64| {
            let x = a * y.powf(-kappa);
            if !x.is_finite() {
                return 0.0;
            }
            f(x) * kappa * x / y
        },
        0.0,
        1.0,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let e = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, Tolerance::default()).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((e.value - exact).abs() < 1e-12);
    }

    #[test]
    fn smooth_oscillatory() {
        let e = integrate(|x| x.sin(), 0.0, 50.0, Tolerance::default()).unwrap();
        assert!((e.value - (1.0 - 50f64.cos())).abs() < 1e-9);
    }

    #[test]
    fn endpoint_singularities() {
        // int_0^1 x^{-0.8} (1-x)^{-0.6} dx = B(0.2, 0.4)
        let exact = statrs::function::beta::beta(0.2, 0.4);
        let e = integrate_endpoint_singular(
            |_, xa, xb| xa.powf(-0.8) * xb.powf(-0.6),
            0.0,
            1.0,
            -0.8,
            -0.6,
            Tolerance::default(),
        )
        .unwrap();
        assert!(
            ((e.value - exact) / exact).abs() < 1e-10,
            "{} vs {exact}",
            e.value
        );
    }

    #[test]
    fn power_tail() {
        // int_2^inf x^{-1.3} dx = 2^{-0.3}/0.3
        let e = integrate_power_tail(|x| x.powf(-1.3), 2.0, 1.3, Tolerance::default()).unwrap();
        let exact = 2f64.powf(-0.3) / 0.3;
        assert!(((e.value - exact) / exact).abs() < 1e-10);
        let e =
            integrate_power_tail(|x| 1.0 / (1.0 + x * x), 1.0, 2.0, Tolerance::default()).unwrap();
        assert!((e.value - std::f64::consts::FRAC_PI_4).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_reports() {
        let err = integrate(
            |x| (1.0 / x).sin(),
            1e-12,
            1.0,
            Tolerance::new(1e-14, 0.0, 20),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Quadrature {
                subdivisions: 20,
                ..
            }
        ));
    }
}
