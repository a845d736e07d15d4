//! Named random sub-streams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by the
//! run seed, a stream name and an integer path, so that results never depend
//! on the order in which independent work items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream names used by the pipeline.
pub mod streams {
    pub const DATASET: &str = "dataset";
    pub const INIT: &str = "init";
    pub const ROLLOUT: &str = "rollout";
    pub const TRAIN: &str = "train";
    pub const EVAL: &str = "eval";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Derives a 64-bit stream key from a seed, a stream name and an index path.
pub fn stream_key(seed: u64, name: &str, path: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ fnv1a(name));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn stream(seed: u64, name: &str, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(stream_key(seed, name, path))
}
