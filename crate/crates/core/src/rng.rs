//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit generator. A chain owns one
//! master stream (stream 0) for the model, g and parameter blocks, and one
//! stream per observation for the latent updates, so the latent sweep gives
//! identical draws regardless of visiting order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn master_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for observation `i` under the given master seed.
pub fn observation_rng(seed: u64, i: usize) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng
}

/// Stream reserved for data splitting and other bookkeeping draws.
pub fn aux_rng(seed: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

pub fn observation_rngs(seed: u64, n: usize) -> Vec<ChainRng> {
    (0..n).map(|i| observation_rng(seed, i)).collect()
}
