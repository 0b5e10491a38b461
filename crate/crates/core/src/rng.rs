//! Deterministic random streams.
//!
//! Every stochastic component draws from a [`ChaCha8Rng`] whose key comes
//! from a master seed and whose stream id names the consumer (a simulation
//! index, a snapshot, a node id). ChaCha is counter based, so stream `i` is
//! the same no matter which worker runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream `index` of the family keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent 64-bit seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // splitmix64 finalizer over (seed ^ fnv1a(label))
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in label.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    mix64(seed ^ h)
}

pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
