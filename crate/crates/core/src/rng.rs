//! Seeded random number generation.
//!
//! Every stochastic routine draws from [`SimRng`], a ChaCha8 stream seeded from a
//! single `u64`. ChaCha output is value-stable across releases of `rand_chacha`,
//! so a seed pins a run bit-for-bit. Independent workers use the splitting rule
//! `stream k <- seed + k` (wrapping).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for worker stream `k` derived from a master seed.
pub fn stream(seed: u64, k: u64) -> SimRng {
    rng_from_seed(seed.wrapping_add(k))
}
