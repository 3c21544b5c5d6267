//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream derived from
//! the run seed, so that adding draws in one place (for example building
//! longer texts) never shifts the draws seen by another (batch shuffling,
//! parameter initialization).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod streams {
    pub const DETECTOR_INIT: u64 = 1;
    pub const SUPERVISOR_INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const LONG_TEXT: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const MIX: u64 = 6;
    pub const SYNTH: u64 = 7;
    pub const MONTE_CARLO: u64 = 8;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
