//! Seeded, splittable random streams.
//!
//! Every stochastic computation draws from a stream identified by
//! `(master seed, replicate index, purpose tag)`. The ChaCha stream position is
//! set from the replicate and tag, so a replicate's draws never depend on which
//! worker ran it or in which order.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Stream;

/// Purpose tags used to separate streams that share a replicate index.
pub mod tag {
    pub const DATA: u64 = 1;
    pub const MONTE_CARLO: u64 = 2;
    pub const INIT: u64 = 3;
}

/// Stream for `(seed, replicate, tag)`.
pub fn stream(seed: u64, replicate: u64, tag: u64) -> Stream {
    let mut rng = Stream::seed_from_u64(seed);
    rng.set_stream((replicate << 16) | (tag & 0xffff));
    rng
}
