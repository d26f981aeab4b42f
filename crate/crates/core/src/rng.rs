//! Seeded random streams. Every randomized operation takes an explicit seed;
//! independent consumers of the same seed draw from distinct ChaCha streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub(crate) mod stream {
    pub const REBALANCE: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const SYNTH: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const KMEANS: u64 = 6;
    pub const META_SET: u64 = 7;
    pub const OSR: u64 = 8;
    pub const GRAD_CHECK: u64 = 9;
    pub const SYNTH_UNKNOWN: u64 = 10;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
