//! Seed derivation.
//!
//! All randomness in a run flows from one top-level seed. Stages (bag
//! sampling, fold assignment, trials, ...) derive their own seeds from the
//! stage name and the base seed so that stages can run in any order, or
//! concurrently, without sharing RNG state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// Derive a stage seed from a base seed and a stage name.
///
/// FNV-1a over the stage name, folded with the base seed through a
/// splitmix64 finalizer. Stable across platforms and releases.
pub fn derive_seed(base: u64, stage: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in stage.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(base ^ h)
}

/// Seeded RNG used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
