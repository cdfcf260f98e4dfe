//! Counter-based seed derivation.
//!
//! Every random stream in the library is keyed by `(base, stream, index)` so a
//! single master seed fans out into independent, reproducible sub-streams. Two
//! callers that ask for the same key always get the same stream, which is how
//! single attacks and co-attacks share restart schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derives a child seed for the `index`-th draw of a named stream.
pub fn derive(base: u64, stream: &str, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ fnv1a(stream)).wrapping_add(splitmix64(index)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(base: u64, stream: &str, index: u64) -> Rng {
    rng(derive(base, stream, index))
}
