//! Deterministic seed derivation. Every random decision in the pipeline is
//! drawn from a ChaCha stream keyed by a global seed plus a fixed path of
//! stream identifiers, so work can be split across workers without changing
//! the result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of stream ids into a single seed.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D)))
    })
}

pub fn rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, path))
}

// Stream tags, kept distinct so unrelated consumers never share a stream.
pub(crate) const STREAM_TEMPLATE: u64 = 1;
pub(crate) const STREAM_SKIN: u64 = 2;
pub(crate) const STREAM_SAMPLE: u64 = 3;
pub(crate) const STREAM_SPLIT: u64 = 4;
pub(crate) const STREAM_INIT: u64 = 5;
pub(crate) const STREAM_SHUFFLE: u64 = 6;
pub(crate) const STREAM_JITTER: u64 = 7;
