//! Seed handling. Every random stream is a ChaCha8 generator seeded from a
//! user seed and a stream index through [`derive_seed`], so streams are
//! independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` under user seed `seed`: `splitmix64(seed + splitmix64(stream))`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(stream)))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Stream indexes reserved for the different consumers of a run seed.
pub mod streams {
    pub const DEMAND: u64 = 1;
    pub const DISRUPTION: u64 = 2;
    pub const SIMULATION: u64 = 3;
    pub const SYNTH: u64 = 4;
}
