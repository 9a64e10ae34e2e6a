//! Reproducible random streams.
//!
//! Every unit of work (one hydrodynamical configuration, or one baseline
//! chain) draws from its own ChaCha8 stream keyed by `(seed, index)`, so the
//! samples do not depend on how the work is split across threads.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `r` derived from the master seed.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    mix64(master ^ mix64(replicate.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Independent stream for work item `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform on `[0, 1)` with 53 random bits.
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `[-1, 1)`.
pub fn uniform_symmetric<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    2.0 * uniform01(rng) - 1.0
}
