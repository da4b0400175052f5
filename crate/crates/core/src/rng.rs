//! Seeding helpers.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`. Standard normals use
//! the ziggurat sampler behind `rand_distr::StandardNormal`. Derived seeds mix
//! a parent seed with a counter through SplitMix64, so trial `i` of a campaign
//! always sees the same stream regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `index` under `parent`.
pub fn derive(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference SplitMix64 generator seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
