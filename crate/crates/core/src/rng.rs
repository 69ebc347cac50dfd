//! Seed derivation for per-sample RNG streams: results stay independent of
//! thread scheduling because every sample owns its own generator.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for the stream identified by (seed, ids...).
pub fn stream_rng(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    let mut s = splitmix64(seed);
    for &id in ids {
        s = splitmix64(s ^ id);
    }
    ChaCha8Rng::seed_from_u64(s)
}
