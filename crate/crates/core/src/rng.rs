//! Seeded random streams.
//!
//! Every random draw in the crate comes from [`ChaCha8Rng`] seeded with
//! `seed_from_u64(seed)` and then moved onto a dedicated stream with
//! `set_stream`. ChaCha8 is specified bit-for-bit, so a `(seed, stream)`
//! pair gives the same numbers on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. The robot index (or other sub-index) goes into the low
/// 32 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Channel = 1,
    Geometry = 2,
    Placement = 3,
    Pilot = 4,
    Exam = 5,
    BaseMemory = 6,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 32) | (index & 0xffff_ffff));
    rng
}
