//! Seed derivation shared by every randomized routine.
//!
//! All randomness flows through [`rng`] with seeds produced by
//! [`derive_seed`], so a result depends only on `(base seed, stream)` and
//! never on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream tags keep independent consumers of the same base seed apart.
pub mod stream {
    pub const BASIS: u64 = 0x0b45_1500;
    pub const NEIGHBORS: u64 = 0x4e31_6b00;
    pub const LATENT: u64 = 0x1a7e_0700;
    pub const ENDPOINT_A: u64 = 0xe0d0_000a;
    pub const ENDPOINT_B: u64 = 0xe0d0_000b;
    pub const FAMILY_KNOB: u64 = 0xfa41_0001;
    pub const FAMILY_JITTER: u64 = 0xfa41_0002;
    pub const FAMILY_LAYOUT: u64 = 0xfa41_0003;
    pub const SUBSAMPLE: u64 = 0x5b5a_0000;
    pub const BOOTSTRAP: u64 = 0xb007_0000;
    pub const MONTE_CARLO: u64 = 0x3c00_0000;
    pub const WEIGHTS: u64 = 0x3e16_0000;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes a base seed with a stream tag into a statistically independent seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.rotate_left(17))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` i.i.d. standard normal draws.
pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// A standard-normal latent for a cell seed.
pub fn gaussian_latent(seed: u64, dim: usize) -> Vec<f64> {
    gaussian_vec(&mut rng(derive_seed(seed, stream::LATENT)), dim)
}
