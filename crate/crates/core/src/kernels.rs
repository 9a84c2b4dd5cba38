//! Wiener-integral representations of fBm: moving-average (Mandelbrot-van
//! Ness), harmonizable and Volterra kernels with their normalizing
//! constants, plus quadrature checks that each kernel reproduces the fBm
//! covariance, `int k_t k_s = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
//!
//! Everything here runs in `f64`: the gamma and beta functions come from
//! `statrs` and the tolerances involved are below single precision.
//!
//! Two normalizations deserve a note.
//!
//! * Harmonizable: the constant is defined by
//!   `(K^Ha)^{-2} = 2 int_0^inf (1 - cos x) x^{-2H-1} dx = pi / (Gamma(2H+1) sin(pi H))`,
//!   i.e. `K^Ha = (Gamma(2H+1) sin(pi H) / pi)^{1/2}`, which equals `1/sqrt(pi)`
//!   at `H = 1/2`. The variant `(2 Gamma(2H+1) sin(pi H))^{1/2} / pi` does not
//!   satisfy the defining integral and is not used.
//! * Volterra, `H < 1/2`: the factor `x^{1/2 - H}` multiplies the whole
//!   bracket once ([`VolterraVariant::Standard`]). Repeating it on the
//!   integral term ([`VolterraVariant::AsPrinted`]) does not reproduce the
//!   covariance; it is kept only so the choice stays checkable.

use std::f64::consts::{PI, TAU};

use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::cov::{fbm_covariance, HurstParameter};
use crate::error::{Error, Result};
use crate::quad::{
    integrate, integrate_endpoint_singular, integrate_power_tail, integrate_with_breakpoints,
    Estimate, Tolerance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    MovingAverage,
    Harmonizable,
    Volterra,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [
        KernelKind::MovingAverage,
        KernelKind::Harmonizable,
        KernelKind::Volterra,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::MovingAverage => "moving_average",
            KernelKind::Harmonizable => "harmonizable",
            KernelKind::Volterra => "volterra",
        }
    }
}

/// Form of the Volterra kernel for `H < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolterraVariant {
    /// `K x^{1/2-H} [t^{H-1/2} (t-x)^{H-1/2} - (H-1/2) int_x^t u^{H-3/2} (u-x)^{H-1/2} du]`
    Standard,
    /// As above with an extra `x^{1/2-H}` on the integral term.
    AsPrinted,
}

/// Variant used for `H < 1/2`; the one that reproduces the covariance.
pub const VOLTERRA_LOW_H_VARIANT: VolterraVariant = VolterraVariant::Standard;

/// Accuracy controls for the covariance-reproduction integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tolerance: f64,
    /// Split point between the finite-range quadrature and the analytic
    /// treatment of the tail: the moving-average integral is mapped
    /// algebraically beyond `x = -truncation_radius * max(t, s)`; the
    /// harmonizable integral switches to its asymptotic cosine tail at the
    /// first full period past `truncation_radius`.
    pub truncation_radius: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(
        abs_tolerance: f64,
        truncation_radius: f64,
        max_subdivisions: usize,
    ) -> Result<Self> {
        if !(abs_tolerance > 0.0) || !(truncation_radius > 0.0) || max_subdivisions == 0 {
            return Err(Error::InvalidArgument(
                "quadrature tolerance, truncation radius and subdivision budget must be positive"
                    .into(),
            ));
        }
        Ok(Self {
            abs_tolerance,
            truncation_radius,
            max_subdivisions,
        })
    }

    fn tolerance(&self, factor: f64) -> Tolerance {
        Tolerance::new(self.abs_tolerance * factor, 1e-12, self.max_subdivisions)
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tolerance: 1e-4,
            truncation_radius: 64.0,
            max_subdivisions: 4000,
        }
    }
}

/// Tolerance for integrals nested inside kernel evaluations.
const INNER: Tolerance = Tolerance::new(1e-13, 1e-11, 500);

fn mu(h: HurstParameter<f64>) -> f64 {
    h.value() - 0.5
}

/// `(Gamma(2H+1) sin(pi H))^{1/2} / Gamma(H + 1/2)`
pub fn ma_constant_closed(h: HurstParameter<f64>) -> f64 {
    let h = h.value();
    (gamma(2.0 * h + 1.0) * (PI * h).sin()).sqrt() / gamma(h + 0.5)
}

/// `(1/(2H) + int_0^inf ((x+1)^{H-1/2} - x^{H-1/2})^2 dx)^{-1/2}` by quadrature.
pub fn ma_constant_integral(h: HurstParameter<f64>, tol: Tolerance) -> Result<Estimate> {
    let m = mu(h);
    let integral = if m == 0.0 {
        Estimate {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        }
    } else {
        let diff = |x: f64| {
            // (x+1)^mu - x^mu = x^mu expm1(mu ln(1 + 1/x)), stable for large x
            let d = if x > 1.0 {
                x.powf(m) * (m * (1.0 / x).ln_1p()).exp_m1()
            } else {
                (x + 1.0).powf(m) - x.powf(m)
            };
            d * d
        };
        let near = integrate_endpoint_singular(
            |x, _, _| diff(x),
            0.0,
            1.0,
            2.0 * m.min(0.0),
            0.0,
            tol.scaled(0.5),
        )?;
        let tail = integrate_power_tail(diff, 1.0, 2.0 - 2.0 * m, tol.scaled(0.5))?;
        near + tail
    };
    let total = 1.0 / (2.0 * h.value()) + integral.value;
    let value = total.powf(-0.5);
    // d(total^{-1/2}) = -1/2 total^{-3/2} d(total)
    Ok(Estimate {
        value,
        error: 0.5 * total.powf(-1.5) * integral.error,
        subdivisions: integral.subdivisions,
    })
}

/// Both evaluations of the moving-average constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaConstant {
    pub closed_form: f64,
    pub integral: f64,
    pub integral_error: f64,
}

pub fn ma_constant(h: HurstParameter<f64>) -> Result<MaConstant> {
    let est = ma_constant_integral(h, Tolerance::new(1e-12, 1e-12, 4000))?;
    Ok(MaConstant {
        closed_form: ma_constant_closed(h),
        integral: est.value,
        integral_error: est.error,
    })
}

/// `I(H) = int_0^inf (1 - cos x) x^{-2H-1} dx = pi / (2 Gamma(2H+1) sin(pi H))`.
pub fn ha_integral_closed(h: HurstParameter<f64>) -> f64 {
    let h = h.value();
    PI / (2.0 * gamma(2.0 * h + 1.0) * (PI * h).sin())
}

/// `C(Z) = int_Z^inf cos(z) z^{-p} dz` for `Z` a multiple of `2 pi`, from the
/// asymptotic expansion obtained by repeated integration by parts,
/// `sum_j (-1)^j p (p+1) ... (p+2j) Z^{-p-2j-1}`, truncated at its smallest
/// term. The truncation error is of the order of the smallest term, so the
/// result is only trusted for `Z >= 16 pi`.
fn cosine_tail(p: f64, z: f64) -> f64 {
    debug_assert!(z >= TAU * MIN_TAIL_PERIODS * (1.0 - 1e-12));
    let mut coeff = p;
    let mut power = z.powf(-p - 1.0);
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let inv_z2 = 1.0 / (z * z);
    for j in 0..200 {
        let term = coeff * power;
        if term.abs() >= last {
            break;
        }
        sum += term;
        last = term.abs();
        if last < 1e-18 * sum.abs() {
            break;
        }
        let jf = j as f64;
        coeff *= -(p + 2.0 * jf + 1.0) * (p + 2.0 * jf + 2.0);
        power *= inv_z2;
    }
    sum
}

const MIN_TAIL_PERIODS: f64 = 8.0;

/// `J(u) = int_0^inf (1 - cos(u x)) x^{-2H-1} dx` by quadrature on `[0, A]`
/// (one panel per period) plus the analytic tail beyond `A`, where `u A` is
/// a multiple of `2 pi` no smaller than `u * radius`.
fn one_minus_cos_integral(
    h: HurstParameter<f64>,
    u: f64,
    radius: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if u == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let p = 2.0 * h.value() + 1.0;
    let periods = ((u * radius) / TAU).ceil().max(MIN_TAIL_PERIODS);
    let period = TAU / u;
    let a = periods * period;
    let f = |x: f64| {
        let s = (0.5 * u * x).sin();
        2.0 * s * s * x.powf(-p)
    };
    // First period carries the x^{1-2H} behaviour at the origin.
    let head = integrate_endpoint_singular(
        |x, _, _| f(x),
        0.0,
        period,
        1.0 - 2.0 * h.value(),
        0.0,
        tol.scaled(0.5),
    )?;
    let breaks: Vec<f64> = (2..periods as usize).map(|k| k as f64 * period).collect();
    let body = integrate_with_breakpoints(f, period, a, &breaks, tol.scaled(0.5))?;
    let tail = a.powf(1.0 - p) / (p - 1.0) - u.powf(p - 1.0) * cosine_tail(p, u * a);
    Ok(head
        + body
        + Estimate {
            value: tail,
            error: 0.0,
            subdivisions: 0,
        })
}

/// Quadrature evaluation of `I(H)`.
pub fn ha_integral_quadrature(h: HurstParameter<f64>, tol: Tolerance) -> Result<Estimate> {
    one_minus_cos_integral(h, 1.0, 200.0, tol)
}

/// Harmonizable constant with both evaluations of the defining integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaConstant {
    /// `(2 I(H))^{-1/2}` from the closed form of `I(H)`.
    pub value: f64,
    pub integral_closed: f64,
    pub integral_quadrature: f64,
    pub quadrature_error: f64,
}

pub fn ha_constant_closed(h: HurstParameter<f64>) -> f64 {
    (2.0 * ha_integral_closed(h)).powf(-0.5)
}

pub fn ha_constant(h: HurstParameter<f64>) -> Result<HaConstant> {
    let quad = ha_integral_quadrature(h, Tolerance::new(1e-10, 1e-12, 4000))?;
    let closed = ha_integral_closed(h);
    Ok(HaConstant {
        value: (2.0 * closed).powf(-0.5),
        integral_closed: closed,
        integral_quadrature: quad.value,
        quadrature_error: quad.error,
    })
}

/// Volterra normalizing constant for the branch selected by `H`.
pub fn volterra_constant(h: HurstParameter<f64>) -> f64 {
    let hv = h.value();
    if hv > 0.5 {
        (hv * (2.0 * hv - 1.0) / beta(2.0 - 2.0 * hv, hv - 0.5)).sqrt()
    } else if hv < 0.5 {
        (2.0 * hv / ((1.0 - 2.0 * hv) * beta(1.0 - 2.0 * hv, hv + 0.5))).sqrt()
    } else {
        1.0
    }
}

/// Kernel constants for one `H`, computed once from closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernels {
    hurst: HurstParameter<f64>,
    ma: f64,
    ha: f64,
    volterra: f64,
    variant: VolterraVariant,
}

impl Kernels {
    pub fn new(hurst: HurstParameter<f64>) -> Self {
        Self::with_variant(hurst, VOLTERRA_LOW_H_VARIANT)
    }

    pub fn with_variant(hurst: HurstParameter<f64>, variant: VolterraVariant) -> Self {
        Self {
            hurst,
            ma: ma_constant_closed(hurst),
            ha: ha_constant_closed(hurst),
            volterra: volterra_constant(hurst),
            variant,
        }
    }

    pub fn hurst(&self) -> HurstParameter<f64> {
        self.hurst
    }

    pub fn constant(&self, kind: KernelKind) -> f64 {
        match kind {
            KernelKind::MovingAverage => self.ma,
            KernelKind::Harmonizable => self.ha,
            KernelKind::Volterra => self.volterra,
        }
    }

    /// `k_t(x)` for the given representation. Points where the kernel has a
    /// non-integrable blow-up return [`Error::Singular`]; removable points
    /// take their limit.
    pub fn value(&self, kind: KernelKind, t: f64, x: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        match kind {
            KernelKind::MovingAverage => self.moving_average(t, x),
            KernelKind::Harmonizable => self.harmonizable(t, x),
            KernelKind::Volterra => self.volterra(t, x),
        }
    }

    fn moving_average(&self, t: f64, x: f64) -> Result<f64> {
        let m = mu(self.hurst);
        if x >= t {
            return Ok(0.0);
        }
        if x > 0.0 {
            return Ok(self.ma * (t - x).powf(m));
        }
        if x == 0.0 {
            return if m < 0.0 && t > 0.0 {
                Err(Error::Singular { t, x })
            } else {
                Ok(self.ma * t.powf(m))
            };
        }
        Ok(self.ma * ma_difference(m, t, -x))
    }

    fn harmonizable(&self, t: f64, x: f64) -> Result<f64> {
        let hv = self.hurst.value();
        if t == 0.0 {
            return Ok(0.0);
        }
        if x == 0.0 {
            return if hv < 0.5 {
                Ok(0.0)
            } else if hv == 0.5 {
                Ok(self.ha * t)
            } else {
                Err(Error::Singular { t, x })
            };
        }
        let weight = x.abs().powf(-hv - 0.5);
        let shape = if x > 0.0 {
            (t * x).sin()
        } else {
            let s = (0.5 * t * x).sin();
            2.0 * s * s
        };
        Ok(self.ha * weight * shape)
    }

    fn volterra(&self, t: f64, x: f64) -> Result<f64> {
        self.volterra_at(t, x, t - x)
    }

    /// Volterra kernel with `t - x` supplied separately, so that points close
    /// to the upper end of the support keep their relative accuracy.
    fn volterra_at(&self, t: f64, x: f64, t_minus_x: f64) -> Result<f64> {
        if x < 0.0 || t_minus_x < 0.0 {
            return Ok(0.0);
        }
        let m = mu(self.hurst);
        if m == 0.0 {
            return Ok(1.0);
        }
        if x == 0.0 {
            return Err(Error::Singular { t, x });
        }
        if t_minus_x == 0.0 {
            return if m > 0.0 {
                Ok(0.0)
            } else {
                Err(Error::Singular { t, x })
            };
        }
        let inner = volterra_inner(m, t, x, t_minus_x)?;
        Ok(if m > 0.0 {
            self.volterra * x.powf(-m) * inner
        } else {
            let extra = match self.variant {
                VolterraVariant::Standard => 1.0,
                VolterraVariant::AsPrinted => x.powf(-m),
            };
            self.volterra * x.powf(-m) * (t.powf(m) * t_minus_x.powf(m) - m * extra * inner)
        })
    }

    /// `int k_t(x) k_s(x) dx` over the support of the representation.
    pub fn inner_product(
        &self,
        kind: KernelKind,
        t: f64,
        s: f64,
        q: &QuadratureSpec,
    ) -> Result<f64> {
        if t < 0.0 || s < 0.0 {
            return Err(Error::Domain("times must be nonnegative".into()));
        }
        if t == 0.0 || s == 0.0 {
            return Ok(0.0);
        }
        let est = match kind {
            KernelKind::MovingAverage => self.ma_inner_product(t, s, q)?,
            KernelKind::Harmonizable => self.ha_inner_product(t, s, q)?,
            KernelKind::Volterra => self.volterra_inner_product(t, s, q)?,
        };
        if est.error > q.abs_tolerance {
            return Err(Error::Quadrature {
                estimate: est.value,
                error: est.error,
                subdivisions: est.subdivisions,
            });
        }
        Ok(est.value)
    }

    fn ma_inner_product(&self, t: f64, s: f64, q: &QuadratureSpec) -> Result<Estimate> {
        let m = mu(self.hurst);
        let k2 = self.ma * self.ma;
        let lo = t.min(s);
        let tol = q.tolerance(1.0 / 6.0);
        // (0, t ^ s): both kernels are plain powers.
        let upper_alpha = if t == s { 2.0 * m } else { m.min(0.0) };
        let positive = integrate_endpoint_singular(
            |_, _, to_lo| k2 * (t - lo + to_lo).powf(m) * (s - lo + to_lo).powf(m),
            0.0,
            lo,
            0.0,
            upper_alpha,
            tol,
        )?;
        // (-R, 0): (-x)^mu blows up at 0- for H < 1/2.
        let radius = q.truncation_radius * t.max(s);
        let product = |y: f64| k2 * ma_difference(m, t, y) * ma_difference(m, s, y);
        let negative = integrate_endpoint_singular(
            |y, _, _| product(y),
            0.0,
            radius,
            2.0 * m.min(0.0),
            0.0,
            tol,
        )?;
        // (-inf, -R): product decays like |x|^{2H-3}.
        let tail = integrate_power_tail(product, radius, 3.0 - 2.0 * self.hurst.value(), tol)?;
        Ok(positive + negative + tail)
    }

    fn ha_inner_product(&self, t: f64, s: f64, q: &QuadratureSpec) -> Result<Estimate> {
        // sin(tx) sin(sx) + (1 - cos tx)(1 - cos sx)
        //   = (1 - cos tx) + (1 - cos sx) - (1 - cos (t-s)x)
        let tol = q.tolerance(1.0 / 6.0);
        let k2 = self.ha * self.ha;
        let jt = one_minus_cos_integral(self.hurst, t, q.truncation_radius, tol)?;
        let js = one_minus_cos_integral(self.hurst, s, q.truncation_radius, tol)?;
        let jd = one_minus_cos_integral(self.hurst, (t - s).abs(), q.truncation_radius, tol)?;
        Ok(Estimate {
            value: k2 * (jt.value + js.value - jd.value),
            error: k2 * (jt.error + js.error + jd.error),
            subdivisions: jt.subdivisions + js.subdivisions + jd.subdivisions,
        })
    }

    fn volterra_inner_product(&self, t: f64, s: f64, q: &QuadratureSpec) -> Result<Estimate> {
        let m = mu(self.hurst);
        let lo = t.min(s);
        if m == 0.0 {
            return Ok(Estimate {
                value: lo,
                error: 0.0,
                subdivisions: 0,
            });
        }
        let alpha_0 = -2.0 * m.abs();
        let alpha_end = if t == s { 2.0 * m } else { m.min(0.0) };
        // Kernel failures inside the integrand surface after integration.
        let failure = std::cell::Cell::new(None);
        let product = |x: f64, _: f64, to_lo: f64| match (
            self.volterra_at(t, x, t - lo + to_lo),
            self.volterra_at(s, x, s - lo + to_lo),
        ) {
            (Ok(a), Ok(b)) => a * b,
            (Err(e), _) | (_, Err(e)) => {
                failure.set(Some(e));
                0.0
            }
        };
        let est =
            integrate_endpoint_singular(product, 0.0, lo, alpha_0, alpha_end, q.tolerance(0.5))?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(est),
        }
    }
}

/// `(t + y)^mu - y^mu` for `y > 0`, without cancellation for `y >> t`.
fn ma_difference(m: f64, t: f64, y: f64) -> f64 {
    if y > t {
        y.powf(m) * (m * (t / y).ln_1p()).exp_m1()
    } else {
        (t + y).powf(m) - y.powf(m)
    }
}

/// Inner integral of the Volterra kernel at `0 < x < t`:
/// `int_x^t u^mu (u-x)^{mu-1} du` for `mu > 0`, and
/// `int_x^t u^{mu-1} (u-x)^mu du` for `mu < 0`.
fn volterra_inner(m: f64, t: f64, x: f64, t_minus_x: f64) -> Result<f64> {
    if m > 0.0 {
        // w = (u - x)^mu  =>  (u-x)^{mu-1} du = dw / mu
        let upper = t_minus_x.powf(m);
        let inv = 1.0 / m;
        let est = integrate(|w: f64| (x + w.powf(inv)).powf(m), 0.0, upper, INNER)?;
        Ok(est.value / m)
    } else {
        let near_len = x.min(t_minus_x);
        let split = x + near_len;
        // [x, split]: w = (u - x)^{mu+1}  =>  (u-x)^mu du = dw / (mu+1)
        let e = m + 1.0;
        let inv = 1.0 / e;
        let near = integrate(
            |w: f64| (x + w.powf(inv)).powf(m - 1.0),
            0.0,
            near_len.powf(e),
            INNER,
        )?
        .value
            / e;
        // [split, t]: u = e^v  =>  du = u dv
        let far = if t_minus_x > x {
            integrate(
                |v: f64| {
                    let u = v.exp();
                    u.powf(m) * (u - x).powf(m)
                },
                split.ln(),
                t.ln(),
                INNER,
            )?
            .value
        } else {
            0.0
        };
        Ok(near + far)
    }
}

/// Convenience wrapper: `k_t(x)` with cached constants for `H`.
pub fn kernel_value(kind: KernelKind, h: HurstParameter<f64>, t: f64, x: f64) -> Result<f64> {
    Kernels::new(h).value(kind, t, x)
}

pub fn kernel_inner_product(
    kind: KernelKind,
    h: HurstParameter<f64>,
    t: f64,
    s: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    Kernels::new(h).inner_product(kind, t, s, q)
}

/// Numeric and closed-form sides of
/// `int_0^u x^{-2mu} (u-x)^{mu-1} (v-x)^{mu-1} dx = u^{-mu} v^{-mu} (v-u)^{2H-2} B(2-2H, H-1/2)`,
/// `mu = H - 1/2`, for `1/2 < H < 1` and `0 < u < v`.
pub fn volterra_beta_identity_check(h: HurstParameter<f64>, u: f64, v: f64) -> Result<(f64, f64)> {
    let hv = h.value();
    if hv <= 0.5 {
        return Err(Error::InvalidArgument(format!(
            "identity needs H > 1/2, got {hv}"
        )));
    }
    if !(u > 0.0) || u > v {
        return Err(Error::InvalidArgument(format!(
            "need 0 < u <= v, got u = {u}, v = {v}"
        )));
    }
    if u == v {
        return Err(Error::DegenerateDiagonal);
    }
    let m = hv - 0.5;
    let numeric = integrate_endpoint_singular(
        |x, _, to_u| x.powf(-2.0 * m) * to_u.powf(m - 1.0) * (v - u + to_u).powf(m - 1.0),
        0.0,
        u,
        -2.0 * m,
        m - 1.0,
        Tolerance::new(0.0, 1e-12, 4000),
    )?;
    let closed =
        u.powf(-m) * v.powf(-m) * (v - u).powf(2.0 * hv - 2.0) * beta(2.0 - 2.0 * hv, hv - 0.5);
    Ok((numeric.value, closed))
}

/// Expected value of every inner product: the fBm covariance.
pub fn target_covariance(h: HurstParameter<f64>, t: f64, s: f64) -> Result<f64> {
    fbm_covariance(h, t, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(x: f64) -> HurstParameter<f64> {
        HurstParameter::new(x).unwrap()
    }

    #[test]
    fn ma_constant_at_brownian() {
        let c = ma_constant(hp(0.5)).unwrap();
        assert!((c.closed_form - 1.0).abs() < 1e-12);
        assert!((c.integral - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ma_constant_two_ways() {
        // mpmath at 30 digits: K^MA(0.3) = 0.730282934..., K^MA(0.7) = 1.091809130...
        for (h, reference) in [(0.3, 0.730_282_934_079_923), (0.7, 1.091_809_130_883_912_6)] {
            let c = ma_constant(hp(h)).unwrap();
            assert!((c.closed_form - reference).abs() < 1e-12);
            assert!((c.integral - c.closed_form).abs() < 1e-6, "h={h}: {c:?}");
        }
    }

    #[test]
    fn ha_constant_at_brownian() {
        let c = ha_constant(hp(0.5)).unwrap();
        assert!((c.value - 1.0 / PI.sqrt()).abs() < 1e-12);
        assert!((c.integral_quadrature - PI / 2.0).abs() < 1e-6);
    }

    #[test]
    fn ha_integral_quadrature_matches_closed_form() {
        let mut previous = None;
        for h in [0.3, 0.6, 0.8] {
            let c = ha_constant(hp(h)).unwrap();
            assert!(
                (c.integral_quadrature - c.integral_closed).abs() < 1e-4,
                "h={h}: {c:?}"
            );
            // I(H) is convex in H with a minimum near 0.6; both evaluations
            // must order the sweep identically.
            if let Some((q, cl)) = previous {
                let dq: f64 = c.integral_quadrature - q;
                let dc: f64 = c.integral_closed - cl;
                assert_eq!(dq.signum(), dc.signum());
            }
            previous = Some((c.integral_quadrature, c.integral_closed));
        }
    }

    #[test]
    fn cosine_tail_against_reference() {
        // mpmath quadosc, 25 digits
        for (p, periods, reference, tol) in [
            (1.6, 20.0, 5.570_796_060_712_422e-6, 1e-16),
            (2.6, 40.0, 5.942_867_484_790_25e-9, 1e-20),
            (1.6, 8.0, 6.014_820_210_226_240_2e-5, 1e-15),
            (2.2, 8.0, 7.871_758_731_699_534_5e-6, 1e-16),
        ] {
            let got = cosine_tail(p, TAU * periods);
            assert!(
                (got - reference).abs() < tol,
                "p={p} periods={periods}: {got} vs {reference}"
            );
        }
    }

    #[test]
    fn moving_average_brownian_is_indicator() {
        let k = Kernels::new(hp(0.5));
        for x in [-3.0, -0.5, -1e-9, 0.0, 0.2, 0.999, 1.0, 1.5] {
            let want = if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
            assert!(
                (k.value(KernelKind::MovingAverage, 1.0, x).unwrap() - want).abs() < 1e-12,
                "x={x}"
            );
        }
    }

    #[test]
    fn harmonizable_vanishes_at_time_zero() {
        for h in [0.2, 0.5, 0.9] {
            let k = Kernels::new(hp(h));
            for x in [-5.0, -0.1, 0.0, 0.3, 7.0] {
                assert_eq!(k.value(KernelKind::Harmonizable, 0.0, x).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn volterra_support() {
        for h in [0.3, 0.5, 0.7] {
            let k = Kernels::new(hp(h));
            for x in [-1.0, -1e-12, 2.0 + 1e-12, 5.0] {
                assert_eq!(k.value(KernelKind::Volterra, 2.0, x).unwrap(), 0.0);
            }
            assert_ne!(k.value(KernelKind::Volterra, 2.0, 1.0).unwrap(), 0.0);
        }
        assert!(matches!(
            kernel_value(KernelKind::Volterra, hp(0.7), 1.0, 0.0),
            Err(Error::Singular { .. })
        ));
        assert!(matches!(
            kernel_value(KernelKind::Volterra, hp(0.3), 1.0, 1.0),
            Err(Error::Singular { .. })
        ));
        assert_eq!(
            kernel_value(KernelKind::Volterra, hp(0.7), 1.0, 1.0).unwrap(),
            0.0
        );
        assert!(matches!(
            kernel_value(KernelKind::MovingAverage, hp(0.3), 1.0, 0.0),
            Err(Error::Singular { .. })
        ));
        assert!(matches!(
            kernel_value(KernelKind::Harmonizable, hp(0.8), 1.0, 0.0),
            Err(Error::Singular { .. })
        ));
    }

    /// Brute-force oracle for `int_x^t u^mu (u-x)^{mu-1} du`: the singular
    /// part `x^mu (u-x)^{mu-1}` integrates exactly, the bounded remainder by
    /// a fine midpoint rule.
    fn volterra_inner_oracle(m: f64, t: f64, x: f64) -> f64 {
        let exact = x.powf(m) * (t - x).powf(m) / m;
        let n = 2_000_000;
        let h = (t - x) / n as f64;
        let rest: f64 = (0..n)
            .map(|i| {
                let u = x + (i as f64 + 0.5) * h;
                (u.powf(m) - x.powf(m)) * (u - x).powf(m - 1.0)
            })
            .sum::<f64>()
            * h;
        exact + rest
    }

    #[test]
    fn volterra_value_against_fine_grid() {
        let h = hp(0.7);
        let k = Kernels::new(h);
        let m = 0.2;
        let oracle = volterra_constant(h) * 0.5f64.powf(-m) * volterra_inner_oracle(m, 1.0, 0.5);
        let value = k.value(KernelKind::Volterra, 1.0, 0.5).unwrap();
        assert!((value - oracle).abs() < 1e-6, "{value} vs {oracle}");
    }

    #[test]
    fn inner_products_at_zero() {
        let q = QuadratureSpec::default();
        for kind in KernelKind::ALL {
            assert_eq!(
                kernel_inner_product(kind, hp(0.4), 0.0, 0.0, &q).unwrap(),
                0.0
            );
            assert_eq!(
                kernel_inner_product(kind, hp(0.4), 0.0, 1.0, &q).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn inner_product_examples() {
        let q = QuadratureSpec::default();
        let v = kernel_inner_product(KernelKind::Volterra, hp(0.7), 1.0, 1.0, &q).unwrap();
        assert!((v - 1.0).abs() < 1e-2);
        let v = kernel_inner_product(KernelKind::MovingAverage, hp(0.3), 2.0, 1.0, &q).unwrap();
        assert!((v - fbm_covariance(hp(0.3), 2.0, 1.0).unwrap()).abs() < 1e-2);
    }

    #[test]
    fn beta_identity() {
        for (h, u, v) in [(0.75, 1.0, 2.0), (0.6, 0.5, 3.0)] {
            let (numeric, closed) = volterra_beta_identity_check(hp(h), u, v).unwrap();
            assert!(
                ((numeric - closed) / closed).abs() < 1e-6,
                "{numeric} vs {closed}"
            );
        }
        assert_eq!(
            volterra_beta_identity_check(hp(0.75), 1.0, 1.0).unwrap_err(),
            Error::DegenerateDiagonal
        );
        assert!(volterra_beta_identity_check(hp(0.4), 1.0, 2.0).is_err());
    }

    #[test]
    fn volterra_constant_differs_from_moving_average_above_half() {
        // The two constants coincide below 1/2 and differ by 2/(2H-1) above.
        for h in [0.6, 0.7, 0.8] {
            let ratio = ma_constant_closed(hp(h)) / volterra_constant(hp(h));
            assert!(
                (ratio - 2.0 / (2.0 * h - 1.0)).abs() < 1e-9,
                "h={h} ratio={ratio}"
            );
        }
        for h in [0.2, 0.3, 0.45] {
            assert!((ma_constant_closed(hp(h)) - volterra_constant(hp(h))).abs() < 1e-12);
        }
    }

    fn grid_errors(k: &Kernels, kind: KernelKind, q: &QuadratureSpec) -> f64 {
        let times = [0.5, 1.0, 2.0];
        let mut worst = 0.0f64;
        for t in times {
            for s in times {
                let got = k.inner_product(kind, t, s, q).unwrap();
                let want = fbm_covariance(k.hurst(), t, s).unwrap();
                worst = worst.max((got - want).abs());
            }
        }
        worst
    }

    #[test]
    fn inner_products_reproduce_covariance_on_grid() {
        let q = QuadratureSpec::default();
        for h in [0.3, 0.6, 0.8] {
            let k = Kernels::new(hp(h));
            for kind in KernelKind::ALL {
                let worst = grid_errors(&k, kind, &q);
                assert!(worst < q.abs_tolerance, "{kind:?} h={h}: {worst}");
            }
        }
    }

    #[test]
    fn printed_low_h_volterra_variant_fails() {
        let q = QuadratureSpec::default();
        let k = Kernels::with_variant(hp(0.3), VolterraVariant::AsPrinted);
        assert!(grid_errors(&k, KernelKind::Volterra, &q) > 1e-2);
    }

    #[test]
    fn variogram_from_inner_products() {
        let q = QuadratureSpec::default();
        for h in [0.3, 0.7] {
            let k = Kernels::new(hp(h));
            for kind in KernelKind::ALL {
                let (t, s) = (2.0, 0.5);
                let tt = k.inner_product(kind, t, t, &q).unwrap();
                let ss = k.inner_product(kind, s, s, &q).unwrap();
                let ts = k.inner_product(kind, t, s, &q).unwrap();
                let want = (t - s).powf(2.0 * h);
                assert!((tt + ss - 2.0 * ts - want).abs() < 2e-2, "{kind:?} h={h}");
            }
        }
    }
}
