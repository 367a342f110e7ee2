//! Seed derivation for reproducible parallel runs.
//!
//! Every source of randomness is a ChaCha stream keyed by
//! `(master seed, domain, index)`, so replicates and permutations can run on
//! any number of worker threads and still produce identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Randomness domains, kept distinct so that e.g. permutation streams never
/// collide with replicate streams derived from the same master seed.
pub mod domain {
    pub const PANEL: u64 = 1;
    pub const REPLICATE: u64 = 2;
    pub const PERMUTATION: u64 = 3;
    pub const ANALYSIS: u64 = 4;
    pub const SAMPLING: u64 = 5;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive an independent substream seed from `(master, domain, index)`.
pub fn substream_seed(master: u64, domain: u64, index: u64) -> u64 {
    let a = splitmix64(master ^ splitmix64(domain));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x6a09e667f3bcc909)))
}

/// A seeded generator for one substream.
pub fn substream_rng(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, domain, index))
}
