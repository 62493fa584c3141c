//! Seeded randomness.
//!
//! Every stochastic step (initialization, shuffling, dropout masks,
//! augmentation) draws from ChaCha8, whose output stream is fixed by its
//! published reference vectors, so a seed reproduces the same run on any
//! platform. Sub-seeds are derived by hashing a parent seed with positional
//! indices, which keeps results independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from a parent seed and a path of indices,
/// e.g. `derive_seed(global, &[epoch, sample_index])`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}
