//! Seeded generator plumbing.
//!
//! Every random draw in the crate goes through [`SeedRng`] so that results are
//! reproducible from a single `u64` seed. Independent sub-streams are derived
//! with ChaCha's stream counter, which keeps earlier streams stable when more
//! are requested later.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeedRng = ChaCha8Rng;

/// Generator for `stream` under the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SeedRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, index).next_u64()
}
