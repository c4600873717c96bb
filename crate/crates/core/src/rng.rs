//! Seeding discipline.
//!
//! Every random stream is a ChaCha8 generator (`rand_chacha` 0.3). A stream is
//! identified by a base seed plus a list of integer coordinates (ticker hash,
//! lag, direction, permutation index, ...); the coordinates are folded into a
//! single 64-bit seed with SplitMix64, so a stream never depends on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold stream coordinates into a derived seed.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn stream(seed: u64, coords: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, coords))
}

/// FNV-1a hash of a label (ticker symbols), used as a stream coordinate.
pub fn label_hash(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}
