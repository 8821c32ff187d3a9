//! Seeding and variate generation.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream seeded
//! through [`stream`]. Sub-streams (bootstrap replicates, per-image
//! simulation draws) get their seeds from [`mix`], which is the `index`-th
//! output of a SplitMix64 generator started at `seed`:
//!
//! ```text
//! mix(seed, index) = splitmix64(seed + index * 0x9E3779B97F4A7C15)   (mod 2^64)
//! splitmix64(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!                 z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!                 z ^ (z >> 31)
//! ```
//!
//! Because a replicate's seed depends only on `(seed, index)`, replicates can
//! be generated in any order or in parallel with identical results.
//!
//! Gaussian variates use the inverse normal CDF applied to an open-interval
//! uniform built from the top 53 bits of one `u64`, so the draw sequence is
//! the same on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `index` from a parent `seed`.
pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)))
}

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on the open interval (0, 1).
pub fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE
}

/// Standard normal variate by inversion.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    let unit = Normal::standard();
    unit.inverse_cdf(open_unit(rng))
}

/// Uniform integer in `0..n` (n > 0), platform independent.
pub fn below<R: RngCore>(rng: &mut R, n: u64) -> u64 {
    use rand::Rng;
    rng.random_range(0..n)
}
