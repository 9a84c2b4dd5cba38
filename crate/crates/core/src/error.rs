use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Hurst parameter must lie strictly inside (0, 1), got {0}")]
    HurstOutOfRange(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("order zero: not a valid variation filter")]
    OrderZero,

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("unknown filter name `{0}` (expected increments1, daubechies4 or increments2)")]
    UnknownFilter(String),

    #[error("series shorter than filter: length {len}, filter degree {degree}")]
    SeriesTooShort { len: usize, degree: usize },

    #[error("embedding not nonnegative definite: eigenvalue {value:e} at index {index}")]
    NotNonnegativeDefinite { index: usize, value: f64 },

    #[error("covariance factorization failed at pivot {pivot}: not numerically positive definite")]
    Factorization { pivot: usize },

    #[error("degenerate series (zero variation)")]
    ZeroVariation,

    #[error("estimate outside model range; CI unavailable (h_hat = {0})")]
    EstimateOutOfRange(f64),

    #[error("identity degenerate on the diagonal")]
    DegenerateDiagonal,

    #[error("kernel is singular at x = {x} (t = {t})")]
    Singular { t: f64, x: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e} after {subdivisions} subdivisions")]
    Quadrature {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
