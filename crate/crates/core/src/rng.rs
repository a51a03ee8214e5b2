//! Seed derivation. Every random draw in the crate goes through a generator
//! keyed on an explicit tuple of integers so runs are reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a sequence of keys into one 64-bit seed.
pub fn mix_seed(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x5DEE_CE66_D1CE_4E5B_u64, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn rng_for(keys: &[u64]) -> SimRng {
    ChaCha8Rng::seed_from_u64(mix_seed(keys))
}
