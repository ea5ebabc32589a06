//! Deterministic random draws.
//!
//! All randomness in the crate flows through a counter-based ChaCha stream
//! seeded from [`crate::scalar::Ctx::sub_seed`], so results are reproducible
//! for a fixed seed regardless of call order or thread count.

use crate::scalar::{cx, Cx, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard Gaussian real draws.
pub fn gaussian_reals<T: Real>(seed: u64, count: usize) -> Vec<T> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let x: f64 = r.sample(StandardNormal);
            T::lit(x)
        })
        .collect()
}

/// Standard complex Gaussian draws (independent real and imaginary parts).
pub fn gaussian_complex<T: Real>(seed: u64, count: usize) -> Vec<Cx<T>> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let re: f64 = r.sample(StandardNormal);
            let im: f64 = r.sample(StandardNormal);
            cx(T::lit(re), T::lit(im))
        })
        .collect()
}

/// Uniform draw in `[0, 1)`.
pub fn uniform01<T: Real>(seed: u64) -> T {
    let mut r = rng(seed);
    T::lit(r.gen::<f64>())
}
