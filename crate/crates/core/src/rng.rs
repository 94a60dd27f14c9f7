//! Seed derivation and the repo-wide random generator.
//!
//! Every stochastic operation takes an explicit 64-bit seed. Independent
//! streams are carved out of one base seed by mixing in a stream tag and an
//! index with splitmix64, so a training run can be resumed at any step
//! without replaying the generator history: the randomness at step `i` is a
//! pure function of `(base_seed, tag, i)`.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

/// Stream tags. Keeping them in one place avoids accidental stream reuse.
pub mod stream {
    pub const PHANTOM: u64 = 0x01;
    pub const COILS: u64 = 0x02;
    pub const FIXED_MASK: u64 = 0x03;
    pub const TEST_MASK: u64 = 0x04;
    pub const TRAIN_MASK: u64 = 0x05;
    pub const NOISE: u64 = 0x06;
    pub const SIGMA: u64 = 0x07;
    pub const AUG: u64 = 0x08;
    pub const SAMPLER_SUP: u64 = 0x09;
    pub const SAMPLER_UNSUP: u64 = 0x0a;
    pub const SAMPLER_RANDOM: u64 = 0x0b;
    pub const INIT: u64 = 0x0c;
    pub const VAL: u64 = 0x0d;
    pub const EVAL_NOISE: u64 = 0x0e;
    pub const POWER_ITER: u64 = 0x0f;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `(seed, tag)`.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Derive a child seed from `(seed, tag, index)`.
pub fn mix2(seed: u64, tag: u64, index: u64) -> u64 {
    mix(mix(seed, tag), index)
}

/// Derive a child seed from `(seed, tag, i, j)`.
pub fn mix3(seed: u64, tag: u64, i: u64, j: u64) -> u64 {
    mix(mix2(seed, tag, i), j)
}

/// FNV-1a hash of a name, for seeding per-parameter init streams.
pub fn name_tag(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The repo-wide generator: seedable, fast, identical across platforms.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// rand 0.9 re-exports rand_core; use the same path the generator was built
// against so `SeedableRng` resolves to one trait.
use rand::rand_core;
