//! Deterministic seed derivation for independent random streams.
//!
//! Every stochastic component draws from its own [`ChaCha12Rng`] seeded
//! through [`derive_seed`], so adding a consumer never shifts the draws
//! of another and identical configs reproduce bit-identical runs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer; good avalanche for cheap stream separation.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and two stream coordinates
/// (typically a stream tag and a timestep or element index).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    mix(base ^ mix(stream ^ mix(index)))
}

/// RNG for a derived stream.
pub fn stream_rng(base: u64, stream: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(base, stream, index))
}

/// Stream tags used across the crate. Values are arbitrary but frozen:
/// changing them changes every derived artifact.
pub mod streams {
    pub const LOAD_PROFILE: u64 = 1;
    pub const PV_PROFILE: u64 = 2;
    pub const MEAS_NOISE: u64 = 3;
    pub const METER_PICK: u64 = 4;
    pub const NET_INIT: u64 = 5;
    pub const TRAIN: u64 = 6;
    pub const PRETRAIN: u64 = 7;
    pub const PSEUDO_NOISE: u64 = 8;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(42, 1, 0);
        let b = derive_seed(42, 1, 1);
        let c = derive_seed(42, 2, 0);
        assert_eq!(a, derive_seed(42, 1, 0));
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }

    #[test]
    fn stream_rng_reproducible() {
        let mut r1 = stream_rng(7, 3, 11);
        let mut r2 = stream_rng(7, 3, 11);
        for _ in 0..16 {
            assert_eq!(r1.next_u64(), r2.next_u64());
        }
    }
}
