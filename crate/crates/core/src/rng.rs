//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream addressed by
//! `(master seed, index, purpose)`. Streams for different indices never
//! overlap, so growing the number of experiments leaves earlier ones intact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; each purpose gets its own stream per index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Initial = 0,
    Dynamics = 1,
    Measurement = 2,
    Synthetic = 3,
}

pub fn stream(master: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((index << 2) | purpose as u64);
    rng
}

/// Mixes a parent seed with a child label (splitmix64 finalizer).
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    let mut z = parent ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derived from a text label, e.g. a sweep-cell key.
pub fn derive_seed_str(parent: u64, label: &str) -> u64 {
    // FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive_seed(parent, h)
}
