//! Seeded random streams. Every consumer derives its own stream from a user
//! seed, a domain constant and an index, so changing one knob never reshuffles
//! unrelated randomness.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_SPEAKERS: u64 = 1;
pub const DOMAIN_CONVERSATION: u64 = 2;
pub const DOMAIN_NOISE: u64 = 3;
pub const DOMAIN_DATASET: u64 = 4;
pub const DOMAIN_SHUFFLE: u64 = 5;
pub const DOMAIN_INIT: u64 = 6;
pub const DOMAIN_AUGMENT: u64 = 7;

/// Deterministic stream for (seed, domain, index).
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mixed = seed
        ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}
