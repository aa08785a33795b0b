//! Counter-based random streams.
//!
//! Every replicate draws from its own ChaCha8 stream selected by
//! `(master seed, replicate index)`, so Monte Carlo output does not depend on
//! how replicates are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// The generator for replicate `index` of an experiment seeded with `master`.
pub fn replicate_rng(master: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Derives an independent master seed for a named sub-experiment.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = master ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
