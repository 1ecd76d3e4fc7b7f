//! Seed derivation. Every random stream in a run is keyed off one root seed
//! by mixing in a stream tag with SplitMix64, so a run can be replayed from
//! the root seed alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `tag` under `parent`.
pub fn derive(parent: u64, tag: u64) -> u64 {
    mix64(parent.wrapping_add(GOLDEN_GAMMA).wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ mix64(tag.wrapping_add(GOLDEN_GAMMA)))
}

/// Derive along a path of tags, e.g. `derive_path(seed, &[EPOCH, e, BATCH, b])`.
pub fn derive_path(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(parent, |s, &t| derive(s, t))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const SYNTH: u64 = 5;
}
