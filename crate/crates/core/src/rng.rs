//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from [`ChaCha8Rng`], a
//! counter-based stream cipher generator whose output is identical on every
//! platform. A 64-bit user seed is expanded with `SeedableRng::seed_from_u64`
//! and independent sub-streams are keyed by mixing the seed with a stream tag
//! through SplitMix64. Gaussian variates come from `rand_distr`'s ziggurat
//! sampler for the standard normal.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Generator for `seed`.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for sub-stream `tag` of `seed`.
pub fn substream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// SplitMix64 finalizer applied to `seed ^ golden * (tag + 1)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(tag.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
