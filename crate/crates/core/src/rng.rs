//! Seeded random streams.
//!
//! Every stochastic computation draws from a ChaCha8 generator seeded from a
//! user-visible 64-bit seed. Independent runs that share a seed are separated
//! in one of two ways:
//!
//! * restarts of one optimizer call use the same key with stream id equal to
//!   the restart index ([`stream`]);
//! * logically distinct sub-computations (staircase segments, scales of a
//!   ratio test, entries of a delta schedule) get a child seed from
//!   [`derive_seed`], which mixes the parent seed with a tag via SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
