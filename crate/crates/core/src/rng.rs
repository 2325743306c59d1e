//! Reproducible random streams.
//!
//! Every stream is xoshiro256++ seeded from a 64-bit value through SplitMix64
//! (`seed_from_u64`), so a seed names the same sequence on every platform.
//! Uniform variates take the top 53 bits of one output word.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SimRng = Xoshiro256PlusPlus;

const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer (Steele, Lea and Flood constants).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under top-level seed `seed`:
/// `seed XOR mix64(index)`.
pub fn replication_seed(seed: u64, index: u64) -> u64 {
    seed ^ mix64(index)
}

/// Uniform on `[0, 1)` with 53-bit resolution.
pub fn uniform(rng: &mut SimRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * TWO_POW_MINUS_53
}

/// Uniform on `(0, 1]`, safe to take the logarithm of.
pub fn uniform_open_zero(rng: &mut SimRng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * TWO_POW_MINUS_53
}

/// Exponential variate by inversion.
pub fn exponential(rng: &mut SimRng, rate: f64) -> f64 {
    -uniform_open_zero(rng).ln() / rate
}
