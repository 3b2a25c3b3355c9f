//! The pinned pseudo-random generator used for splits, bootstraps and
//! synthetic data. Changing any of these requires bumping [`PRNG_ID`], since
//! random splits and forests are part of the audited output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recorded in run records and model artifacts.
pub const PRNG_ID: &str = "ChaCha8Rng (rand_chacha 0.9, rand_core::SeedableRng::seed_from_u64)";

pub type PipelineRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> PipelineRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// In-place Fisher–Yates shuffle, walking from the last element down.
pub fn fisher_yates<T>(items: &mut [T], rng: &mut PipelineRng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Draws `k` distinct indices from `0..n` (partial Fisher–Yates), in draw order.
pub fn sample_without_replacement(n: usize, k: usize, rng: &mut PipelineRng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let k = k.min(n);
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
