//! Seed derivation for reproducible experiments.
//!
//! Every random draw in the crate comes from a ChaCha8 stream seeded with
//! `derive_seed(master, domain, index)`, a SplitMix64 finalizer chain. The
//! outcome of draw `index` therefore never depends on how many other draws
//! were made, or in which thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in output metadata.
pub const RNG_ALGORITHM: &str = "chacha8/splitmix64-derive-v1";

pub type Rng = ChaCha8Rng;

/// Domain tags keep independent uses of the same master seed apart.
pub mod domain {
    pub const SYMBOL: u64 = 0x5359_4d42;
    pub const TRIAL: u64 = 0x5452_4941;
    pub const REQUEST: u64 = 0x5245_5155;
    pub const SOURCE: u64 = 0x534f_5552;
    pub const GEOMETRY: u64 = 0x4745_4f4d;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ domain) ^ index)
}

pub fn rng_for(master: u64, domain: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, domain, index))
}
