//! Seed derivation. Every random draw in the crate comes from a ChaCha8
//! stream whose seed is a pure function of a root seed and a path of labels,
//! so runs are reproducible and resumable without carrying generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a root seed with a sequence of labels into a child seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(root: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Stream labels, kept distinct so unrelated draws never share a sequence.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const DATA_TRAIN: u64 = 2;
    pub const DATA_EVAL: u64 = 3;
    pub const AUGMENT: u64 = 4;
    pub const MASK: u64 = 5;
    pub const DERANGE: u64 = 6;
    pub const DROPOUT: u64 = 7;
    pub const SHUFFLE: u64 = 8;
    pub const GW_INIT: u64 = 9;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = rng_from(7, &[1, 2]).random();
        let b: u64 = rng_from(7, &[1, 2]).random();
        let c: u64 = rng_from(7, &[2, 1]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
