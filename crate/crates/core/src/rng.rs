//! Seeded random streams.
//!
//! Every Monte Carlo unit (sample, bridge, grid point) draws from its own
//! ChaCha stream whose seed is a hash of the master seed and the unit's key,
//! so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a key path.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k.wrapping_add(0x5851_f42d_4c95_7f2d))))
}

/// Key identifying a chart point by its exact bit pattern.
pub fn point_key(x: &[f64]) -> u64 {
    x.iter().fold(0x243f_6a88_85a3_08d3, |acc, v| splitmix64(acc ^ v.to_bits()))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
