//! Deterministic seed derivation.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded by
//! [`derive`], so any trial can be replayed from its master seed and a short
//! path of integer tags (record id, condition, trial index, ...).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags for the different consumers of derived seeds.
pub mod tag {
    pub const MASK: u64 = 0x6d61_736b;
    pub const TRAIN: u64 = 0x7472_6169;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const PROBE: u64 = 0x7072_6f62;
    pub const CONDITIONAL: u64 = 0x636f_6e64;
    pub const MIXTURE: u64 = 0x6d69_7874;
    pub const SHADOW: u64 = 0x7368_6164;
    pub const ATTACK: u64 = 0x6174_7463;
    pub const SENSITIVITY: u64 = 0x7365_6e73;
    pub const SWEEP: u64 = 0x7377_6570;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `master` with a path of tags into a new 64-bit seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    rng(derive(master, path))
}
