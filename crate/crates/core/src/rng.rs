//! Seeded random streams.
//!
//! Every sampled path `i` of a batch seeded with `seed` draws from its own
//! ChaCha8 stream: the generator is seeded with `seed` and positioned on
//! stream `i`. Paths are therefore independent of scheduling and worker
//! count. Gaussian draws are taken in `f64` and converted afterwards, so
//! `f32` and `f64` runs consume identical random numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;

pub type PathRng = ChaCha8Rng;

pub fn path_rng(seed: u64, index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Fills `out` with independent standard Gaussians, in index order.
pub fn fill_standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, out: &mut [T]) {
    for slot in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *slot = T::lit(z);
    }
}

/// Derives an unrelated child seed, e.g. for a bootstrap nested inside a
/// seeded experiment (splitmix64 finalizer).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = vec![0.0f64; 8];
        let mut b = vec![0.0f64; 8];
        fill_standard_normal(&mut path_rng(7, 3), &mut a);
        fill_standard_normal(&mut path_rng(7, 3), &mut b);
        assert_eq!(a, b);
        fill_standard_normal(&mut path_rng(7, 4), &mut b);
        assert_ne!(a, b);
    }

    #[test]
    fn precision_shares_draws() {
        let mut a = vec![0.0f64; 4];
        let mut b = vec![0.0f32; 4];
        fill_standard_normal(&mut path_rng(1, 0), &mut a);
        fill_standard_normal(&mut path_rng(1, 0), &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x as f32, *y);
        }
    }
}
