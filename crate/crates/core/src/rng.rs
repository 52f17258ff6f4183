//! Seeded random substreams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent generator number `stream` derived from `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A child seed for component `index`, stable across runs and platforms.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    substream(seed, index.wrapping_add(1 << 32)).next_u64()
}
