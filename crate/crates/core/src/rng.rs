//! Seed derivation. Every random stream in the crate is a `ChaCha8Rng`
//! keyed by a base seed plus a stream label, so results never depend on
//! call order across subsystems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, stream: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(stream)) ^ index)
}

pub fn stream(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream, index))
}

pub(crate) mod streams {
    pub const RGG: u64 = 1;
    pub const SCHEDULE: u64 = 2;
    pub const QUADRATIC: u64 = 3;
    pub const PARTITION: u64 = 4;
    pub const BANDWIDTH: u64 = 5;
    pub const INIT: u64 = 6;
    pub const ENGINE: u64 = 7;
}
