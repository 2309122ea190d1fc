//! Deterministic random streams.
//!
//! Every stochastic operation takes an explicit generator. Generators are
//! ChaCha8 instances keyed by a 64-bit master seed and addressed by a 64-bit
//! stream id, so independent trials can be replayed in isolation and in any
//! order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for `stream_id` under `master_seed`.
pub fn stream(master_seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Generator for the plain seed, stream 0.
pub fn seeded(seed: u64) -> StreamRng {
    stream(seed, 0)
}

/// Folds a tuple of labels into a stream id (splitmix64 finalizer per part).
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        h = mix(h ^ mix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
