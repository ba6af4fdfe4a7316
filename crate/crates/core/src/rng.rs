//! Portable random streams.
//!
//! Every random quantity in the toolkit comes from ChaCha8 (the
//! `rand_chacha` implementation, whose output is fixed by the published
//! ChaCha specification and independent of platform) keyed by a 64-bit seed.
//! A seed is expanded into a ChaCha key with `seed_from_u64`; the stream id
//! separates the uses of one seed so that initializing a network and
//! drawing a mutation direction from the same seed yield unrelated numbers.
//! Normal variates use the ziggurat sampler from `rand_distr`, pinned to an
//! exact version in the workspace manifest.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    /// Network weight initialization.
    Init = 0,
    /// Mutation directions.
    Direction = 1,
    /// Master stream of an experiment: seeds for new actions, parent picks.
    Master = 2,
}

pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Master RNG of a search or GA run.
pub fn master(seed: u64) -> ChaCha8Rng {
    stream(seed, Stream::Master)
}
