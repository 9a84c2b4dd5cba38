//! Simulation of fractional Brownian motion by circulant embedding, Hurst
//! estimation by discrete variations, and numerical checks of the integral
//! representations of fBm.
//!
//! The covariance, filter, sampling and estimation code is generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix the common `f64`
//! instantiations. Kernel evaluation and quadrature are `f64` only.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circulant;
pub mod cli;
pub mod cov;
pub mod error;
pub mod filters;
pub mod hurst;
pub mod io;
pub mod kernels;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Hurst = cov::HurstParameter<f64>;
pub type Embedding = circulant::CirculantEmbedding<f64>;
pub type Embedding32 = circulant::CirculantEmbedding<f32>;
pub type Fgn = circulant::FgnSeries<f64>;
pub type FbmPath = circulant::FbmPath<f64>;
pub type VariationFilter = filters::Filter<f64>;
pub type Estimator = hurst::EstimatorConfig<f64>;
pub type Estimate = hurst::EstimateResult<f64>;
