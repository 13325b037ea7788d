//! Deterministic per-trial random streams.
//!
//! Every Monte-Carlo trial draws from its own ChaCha stream whose seed is a
//! hash of the master seed and the trial coordinates, so results never depend
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a list of stream coordinates.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn stream(master: u64, coords: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, coords))
}
