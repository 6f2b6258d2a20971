//! Seed handling.
//!
//! Every stochastic operation takes an explicit `u64` seed. Independent
//! sub-streams (per read, per replica, per epoch) are derived by mixing the
//! parent seed with the sub-stream coordinates, so results never depend on
//! how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate: ChaCha with 8 rounds, a
/// counter-based stream cipher.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for sub-stream `path` of `seed`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    rng_from_seed(derive_seed(seed, path))
}
