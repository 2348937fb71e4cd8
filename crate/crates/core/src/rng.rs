//! Named random streams derived from a single master seed.
//!
//! Every consumer of randomness draws from its own stream, keyed by purpose
//! and indices, so adding a consumer (for instance a second band) never
//! shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Placement,
    Shadowing { band: u8, bs: u32, user: u32 },
}

impl Stream {
    fn key(self) -> [u64; 4] {
        match self {
            Stream::Placement => [1, 0, 0, 0],
            Stream::Shadowing { band, bs, user } => [2, band as u64, bs as u64, user as u64],
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for `stream` under `master_seed`.
pub fn stream(master_seed: u64, stream: Stream) -> StreamRng {
    let mut h = splitmix64(master_seed);
    for k in stream.key() {
        h = splitmix64(h ^ k);
    }
    ChaCha8Rng::seed_from_u64(h)
}
