//! Counter-based seed derivation.
//!
//! A master seed is split into independent streams indexed by
//! `(trial, slot)`. Each derived seed depends only on its own coordinates,
//! so changing the number of trials never perturbs earlier trials.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed for `(trial, slot)` under `master`.
pub fn derive_seed(master: u64, trial: u64, slot: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng.set_word_pos(u128::from(slot) * 2);
    rng.next_u64()
}

/// Generator for sub-stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
