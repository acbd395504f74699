//! Seed plumbing.
//!
//! Every stochastic routine takes an explicit `u64` seed. Callers that need
//! several independent streams from one user-facing seed derive them by name
//! with [`sub_seed`], so that adding a new consumer never shifts the draws of
//! an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

/// Creates the crate's generator from a seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a named sub-stream seed, e.g. `sub_seed(seed, "matching")`.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then mixed with the parent seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// Derives the seed of the `index`-th member of a family of streams
/// (MC pass, sweep sample, ...).
pub fn indexed_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_streams_differ() {
        assert_ne!(sub_seed(7, "matching"), sub_seed(7, "dropout"));
        assert_eq!(sub_seed(7, "noise"), sub_seed(7, "noise"));
        assert_ne!(indexed_seed(1, 0), indexed_seed(1, 1));
    }
}
