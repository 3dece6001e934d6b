//! Splittable seed derivation.
//!
//! Every random stream in a run is keyed by a path of integer labels below the
//! master seed, e.g. `[FOLD, 2, GA_RUN, 4]`. Adding a new consumer with a new
//! label never shifts the streams that already exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const OUTER_FOLDS: u64 = 1;
pub const FOLD: u64 = 2;
pub const GA_RUN: u64 = 3;
pub const INNER_FOLDS: u64 = 4;
pub const TUNE: u64 = 5;
pub const GRID_CELL: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a label path.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(parent), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
