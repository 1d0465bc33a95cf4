//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the run seed with a 64-bit
//! stream id. Ids pack `(tag, replica, channel)` so that each replica and each
//! reaction channel of a coupled pair owns an independent, addressable
//! sequence regardless of which worker thread simulates it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::Real;

const CHANNEL_BITS: u32 = 16;
const REPLICA_BITS: u32 = 32;

/// `(seed, stream-id)` pair identifying a random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream for replica `replica` of the ensemble labelled `tag`.
    pub fn replica(seed: u64, tag: u16, replica: usize) -> Self {
        assert!((replica as u64) < (1 << REPLICA_BITS), "replica index too large");
        let stream = (u64::from(tag) << (REPLICA_BITS + CHANNEL_BITS)) | ((replica as u64) << CHANNEL_BITS);
        Self { seed, stream }
    }

    /// Sub-stream for reaction channel `channel` of this replica.
    pub fn channel(self, channel: usize) -> Self {
        assert!(channel < (1 << CHANNEL_BITS) - 1, "too many channels");
        Self {
            seed: self.seed,
            stream: self.stream | (channel as u64 + 1),
        }
    }

    pub fn generator(self) -> Generator {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        Generator { rng }
    }
}

/// Sampling front-end over a positioned ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct Generator {
    rng: ChaCha8Rng,
}

impl Generator {
    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform<S: Real>(&mut self) -> S {
        S::lit(self.rng.random::<f64>())
    }

    /// Unit-rate exponential.
    #[inline]
    pub fn exponential<S: Real>(&mut self) -> S {
        let u: f64 = self.rng.random();
        S::lit(-(1.0 - u).ln())
    }

    #[inline]
    pub fn normal<S: Real>(&mut self) -> S {
        S::lit(self.rng.sample::<f64, _>(StandardNormal))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
