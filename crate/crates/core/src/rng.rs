//! Seeding helpers.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value. Sub-streams (per fold, per model kind, per draw) get their
//! seed from [`derive_seed`], which folds the parent seed and the stream
//! coordinates through the SplitMix64 finalizer. Both algorithms are fixed and
//! platform independent, so a seed reproduces the same splits everywhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a parent seed with stream coordinates into a child seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
