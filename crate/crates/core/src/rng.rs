//! Named, independently seeded random streams.
//!
//! Every source of randomness in a run draws from its own stream so that,
//! for example, a method that never masks embeddings never perturbs the
//! shuffling or initialization sequences. A stream seed is derived from a
//! master seed and a stream name as
//! `splitmix64(master ^ fnv1a64(name))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const INIT_STREAM: &str = "init";
pub const SHUFFLE_STREAM: &str = "shuffle";
pub const MASK_STREAM: &str = "mask";
pub const DATA_STREAM: &str = "data";

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn stream_seed(master: u64, name: &str) -> u64 {
    splitmix64(master ^ fnv1a64(name.as_bytes()))
}

pub fn stream(master: u64, name: &str) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(master, name))
}

/// Seed for a sub-stream indexed by an integer, e.g. one shuffle per epoch.
pub fn indexed_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}
