//! Explicit, seeded random streams.
//!
//! Every stochastic routine takes an [`RngStream`] argument; nothing reads a
//! global generator. A stream is a ChaCha8 generator keyed by `(seed, stream)`,
//! so two consumers with the same seed but different stream ids never share
//! draws, and the same pair always replays the same sequence on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngStream = ChaCha8Rng;

/// Named sub-streams used by the experiment harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamId {
    Signal = 1,
    Observation = 2,
    PriorMu = 3,
    PriorNu = 4,
    FilterMu = 5,
    FilterNu = 6,
    Metric = 7,
    Auxiliary = 8,
}

pub fn stream(seed: u64, id: StreamId) -> RngStream {
    stream_raw(seed, id as u64)
}

pub fn stream_raw(seed: u64, stream: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_replays() {
        let a: Vec<u64> = (0..8).map(|_| 0).scan(stream(7, StreamId::Signal), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..8).map(|_| 0).scan(stream(7, StreamId::Signal), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = stream(7, StreamId::Signal);
        let mut b = stream(7, StreamId::Observation);
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        assert_ne!(xa, xb);
    }
}
