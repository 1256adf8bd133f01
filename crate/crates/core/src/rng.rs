//! Reproducible random streams.
//!
//! Each sentence draws from its own stream derived from `(seed, sentence id,
//! epoch)`, so sampled batches do not depend on the order data is visited in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a over the bytes of `s`; stable across platforms and releases.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed))
}

/// Stream for one sentence in one epoch.
pub fn sentence_stream(seed: u64, sentence_id: &str, epoch: u64) -> StreamRng {
    let mixed = splitmix64(seed ^ splitmix64(stable_hash(sentence_id)) ^ splitmix64(epoch.wrapping_add(0x5151)));
    ChaCha8Rng::seed_from_u64(mixed)
}
