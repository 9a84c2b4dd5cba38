//! Exact simulation of fractional Gaussian noise by circulant embedding.
//!
//! The `N x N` Toeplitz covariance of fGn is embedded in the `M x M`
//! circulant matrix `C = circ(c_0, ..., c_{M-1})`, `M = 2(N - 1)`, whose
//! eigenvalues are the DFT of its first row. With `Q` the unitary DFT matrix
//! and `S = Q Lambda^{1/2} Q^*`, a path is `S zeta` for a standard Gaussian
//! `zeta` of length `M`, truncated to its first `N` entries. `S` is never
//! formed: each path costs one inverse FFT, a diagonal scaling and one
//! forward FFT.
//!
//! DFT conventions: forward `X_k = sum_j x_j e^{-2 pi i jk/M}`, inverse
//! `x_j = (1/M) sum_k X_k e^{+2 pi i jk/M}`.
//!
//! Sizes with `N = 2^q + 1` give a power-of-two `M` and the fastest FFTs,
//! but any `N >= 2` is accepted.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::cov::{fgn_autocovariance_at, fgn_autocovariances, HurstParameter};
use crate::error::{Error, Result};
use crate::rng::{fill_standard_normal, path_rng};
use crate::scalar::Scalar;

/// Eigenvalues in `[-CLAMP_RELATIVE * max, 0)` are rounding noise and are
/// set to zero; anything more negative is rejected.
pub const CLAMP_RELATIVE: f64 = 1e-10;

/// Imaginary parts of the eigenvalue DFT above this fraction of the largest
/// eigenvalue indicate a broken (non-symmetric) first row.
pub const IMAG_RELATIVE: f64 = 1e-8;

/// Relative bound on imaginary rounding noise after FFTs of length `m`:
/// [`IMAG_RELATIVE`] in double precision, widened to the rounding level for
/// `f32`.
pub fn imag_tolerance<T: Scalar>(m: usize) -> T {
    let rounding = T::epsilon() * T::lit(8.0) * T::from_usize_lossy(m.max(2)).log2();
    T::lit(IMAG_RELATIVE).max(rounding)
}

/// Largest `N` accepted by the dense Cholesky sampler.
pub const CHOLESKY_MAX_N: usize = 2048;

/// Equally spaced fGn samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FgnSeries<T> {
    pub values: Vec<T>,
    pub spacing: T,
    pub hurst: HurstParameter<T>,
}

impl<T: Scalar> FgnSeries<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unit-grid fBm observations `B_1, ..., B_N` (partial sums, no origin).
    pub fn partial_sums(&self) -> Vec<T> {
        self.values
            .iter()
            .scan(T::zero(), |acc, &x| {
                *acc = *acc + x;
                Some(*acc)
            })
            .collect()
    }
}

/// fBm sampled at `0, Delta, ..., N Delta`, with `values[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub hurst: HurstParameter<T>,
}

impl<T: Scalar> FbmPath<T> {
    pub fn spacing(&self) -> T {
        self.times[1] - self.times[0]
    }

    pub fn terminal(&self) -> T {
        *self.values.last().unwrap()
    }
}

/// Precomputed circulant spectrum for one `(H, N)`; immutable and shareable
/// across threads.
#[derive(Clone)]
pub struct CirculantEmbedding<T: Scalar> {
    hurst: HurstParameter<T>,
    n: usize,
    row: Vec<T>,
    lambda: Vec<T>,
    sqrt_lambda: Vec<T>,
    clamped: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> std::fmt::Debug for CirculantEmbedding<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantEmbedding")
            .field("hurst", &self.hurst)
            .field("n", &self.n)
            .field("m", &self.embedding_size())
            .field("clamped", &self.clamped)
            .finish()
    }
}

impl<T: Scalar> CirculantEmbedding<T> {
    pub fn new(hurst: HurstParameter<T>, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "embedding needs at least 2 samples, got {n}"
            )));
        }
        let m = 2 * (n - 1);
        let rho = fgn_autocovariances(hurst, n);
        let mut row = Vec::with_capacity(m);
        row.extend_from_slice(&rho);
        // c_k = rho(M - k) for k = N..M-1
        row.extend((n..m).map(|k| rho[m - k]));

        let mut planner = FftPlanner::<T>::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);

        let mut spectrum: Vec<Complex<T>> =
            row.iter().map(|&c| Complex::new(c, T::zero())).collect();
        forward.process(&mut spectrum);

        let max_re = spectrum
            .iter()
            .fold(T::zero(), |acc, z| acc.max(z.re.abs()));
        let max_im = spectrum
            .iter()
            .fold(T::zero(), |acc, z| acc.max(z.im.abs()));
        debug_assert!(max_im <= imag_tolerance::<T>(m) * max_re);

        let floor = -T::lit(CLAMP_RELATIVE) * max_re;
        let mut clamped = 0;
        let mut lambda = Vec::with_capacity(m);
        for (index, z) in spectrum.iter().enumerate() {
            let value = z.re;
            if value < floor {
                return Err(Error::NotNonnegativeDefinite {
                    index,
                    value: value.to_f64_lossy(),
                });
            }
            if value < T::zero() {
                clamped += 1;
                lambda.push(T::zero());
            } else {
                lambda.push(value);
            }
        }
        let sqrt_lambda = lambda.iter().map(|l| l.sqrt()).collect();

        Ok(Self {
            hurst,
            n,
            row,
            lambda,
            sqrt_lambda,
            clamped,
            forward,
            inverse,
        })
    }

    pub fn hurst(&self) -> HurstParameter<T> {
        self.hurst
    }

    /// Samples per path, `N`.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Circulant dimension `M = 2(N - 1)`.
    pub fn embedding_size(&self) -> usize {
        self.row.len()
    }

    /// First row `c_0, ..., c_{M-1}` of the circulant matrix.
    pub fn circulant_row(&self) -> &[T] {
        &self.row
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.lambda
    }

    /// Number of slightly negative eigenvalues that were set to zero.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Inverse DFT of the eigenvalues; recovers the circulant row.
    pub fn recover_row(&self) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = self
            .lambda
            .iter()
            .map(|&l| Complex::new(l, T::zero()))
            .collect();
        self.inverse.process(&mut buf);
        let scale = T::from_usize_lossy(self.embedding_size()).recip();
        buf.into_iter().map(|z| z.re * scale).collect()
    }

    /// `S zeta` over all `M` coordinates, before taking real parts.
    pub fn apply_sqrt(&self, zeta: &[T]) -> Vec<Complex<T>> {
        let m = self.embedding_size();
        assert_eq!(zeta.len(), m, "zeta must have length M");
        let mut buf: Vec<Complex<T>> = zeta.iter().map(|&z| Complex::new(z, T::zero())).collect();
        let mut scratch = vec![
            Complex::default();
            self.inverse
                .get_inplace_scratch_len()
                .max(self.forward.get_inplace_scratch_len())
        ];
        self.transform_in_place(&mut buf, &mut scratch);
        buf
    }

    fn transform_in_place(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        let inv_m = T::from_usize_lossy(self.embedding_size()).recip();
        // (1/sqrt M) Q^* zeta = inverse DFT
        self.inverse.process_with_scratch(buf, scratch);
        for (z, &s) in buf.iter_mut().zip(&self.sqrt_lambda) {
            *z = *z * (s * inv_m);
        }
        // sqrt M Q (.) = forward DFT
        self.forward.process_with_scratch(buf, scratch);
    }

    /// Draws one path, consuming exactly `M` standard Gaussians from `rng`.
    pub fn sample_path<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> FgnSeries<T> {
        let m = self.embedding_size();
        let mut zeta = vec![T::zero(); m];
        fill_standard_normal(rng, &mut zeta);
        let mut buf: Vec<Complex<T>> = zeta
            .into_iter()
            .map(|z| Complex::new(z, T::zero()))
            .collect();
        let mut scratch = vec![
            Complex::default();
            self.inverse
                .get_inplace_scratch_len()
                .max(self.forward.get_inplace_scratch_len())
        ];
        self.transform_in_place(&mut buf, &mut scratch);
        FgnSeries {
            values: buf[..self.n].iter().map(|z| z.re).collect(),
            spacing: T::one(),
            hurst: self.hurst,
        }
    }

    /// Paths `first .. first + count` of the batch seeded with `seed`.
    /// Path `i` always comes from stream `i`, so output does not depend on
    /// the number of rayon workers.
    pub fn sample_batch(&self, seed: u64, first: u64, count: usize) -> Result<Vec<FgnSeries<T>>> {
        if count < 1 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        Ok((0..count as u64)
            .into_par_iter()
            .map(|i| self.sample_path(&mut path_rng(seed, first + i)))
            .collect())
    }
}

pub fn build_embedding<T: Scalar>(h: HurstParameter<T>, n: usize) -> Result<CirculantEmbedding<T>> {
    CirculantEmbedding::new(h, n)
}

/// `count` independent unit-grid fGn series.
pub fn sample_fgn<T: Scalar>(
    embedding: &CirculantEmbedding<T>,
    seed: u64,
    count: usize,
) -> Result<Vec<FgnSeries<T>>> {
    embedding.sample_batch(seed, 0, count)
}

/// Scales unit-grid fGn to the grid `Delta = T/N` and accumulates it into an
/// fBm path with `B_0 = 0` prepended.
pub fn fgn_to_fbm<T: Scalar>(x: &FgnSeries<T>, horizon: T) -> Result<FbmPath<T>> {
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("empty fGn series".into()));
    }
    let n = x.len();
    let delta = horizon / T::from_usize_lossy(n);
    let scale = delta.powf(x.hurst.value());
    let mut values = Vec::with_capacity(n + 1);
    values.push(T::zero());
    let mut acc = T::zero();
    for &v in &x.values {
        acc = acc + scale * v;
        values.push(acc);
    }
    let times = (0..=n).map(|k| T::from_usize_lossy(k) * delta).collect();
    Ok(FbmPath {
        times,
        values,
        hurst: x.hurst,
    })
}

/// Dense lower-triangular factor of the fGn Toeplitz covariance; the
/// brute-force reference sampler.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<T> {
    hurst: HurstParameter<T>,
    n: usize,
    // Row-major packed lower triangle.
    lower: Vec<T>,
}

impl<T: Scalar> CholeskyFactor<T> {
    pub fn new(hurst: HurstParameter<T>, n: usize) -> Result<Self> {
        if !(1..=CHOLESKY_MAX_N).contains(&n) {
            return Err(Error::InvalidArgument(format!(
                "dense sampler supports 1 <= N <= {CHOLESKY_MAX_N}, got {n}"
            )));
        }
        let rho = fgn_autocovariances(hurst, n);
        let idx = |i: usize, j: usize| i * (i + 1) / 2 + j;
        let mut lower = vec![T::zero(); n * (n + 1) / 2];
        for i in 0..n {
            for j in 0..=i {
                let row_i = &lower[idx(i, 0)..idx(i, 0) + j];
                let row_j = &lower[idx(j, 0)..idx(j, 0) + j];
                let dot = row_i
                    .iter()
                    .zip(row_j)
                    .fold(T::zero(), |acc, (a, b)| acc + *a * *b);
                let value = rho[i - j] - dot;
                if i == j {
                    if !(value > T::zero()) {
                        return Err(Error::Factorization { pivot: i });
                    }
                    lower[idx(i, i)] = value.sqrt();
                } else {
                    lower[idx(i, j)] = value / lower[idx(j, j)];
                }
            }
        }
        Ok(Self { hurst, n, lower })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Entry `L[i][j]` for `j <= i`.
    pub fn entry(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.lower[i * (i + 1) / 2 + j]
        }
    }

    /// Draws one path, consuming exactly `N` standard Gaussians.
    pub fn sample_path<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> FgnSeries<T> {
        let mut zeta = vec![T::zero(); self.n];
        fill_standard_normal(rng, &mut zeta);
        let values = (0..self.n)
            .map(|i| {
                let row = &self.lower[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                row.iter()
                    .zip(&zeta)
                    .fold(T::zero(), |acc, (l, z)| acc + *l * *z)
            })
            .collect();
        FgnSeries {
            values,
            spacing: T::one(),
            hurst: self.hurst,
        }
    }
}

/// Reference sampler: `count` paths from the dense Cholesky factor, using
/// the same per-path stream convention as [`sample_fgn`].
pub fn cholesky_sample_oracle<T: Scalar>(
    h: HurstParameter<T>,
    n: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<FgnSeries<T>>> {
    if count < 1 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let factor = CholeskyFactor::new(h, n)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| factor.sample_path(&mut path_rng(seed, i)))
        .collect())
}

/// Exact Toeplitz covariance entry `rho_H(|i - j|)`.
pub fn toeplitz_entry<T: Scalar>(h: HurstParameter<T>, i: usize, j: usize) -> T {
    fgn_autocovariance_at(h, i.abs_diff(j))
}
