//! Seeded random streams shared by every sampler.
//!
//! Streams are backed by ChaCha8, a counter-based generator: a stream is fully
//! determined by its 64-bit seed. Per-replication streams are derived with
//! [`RngStream::derive`], which mixes `(base_seed, replication, algorithm_id)`
//! through the SplitMix64 finalizer, so independent runs never share a stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A single-owner stream of uniform draws.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Stream for one `(replication, algorithm)` cell of an experiment.
    pub fn derive(base_seed: u64, replication: u64, algorithm_id: u64) -> Self {
        Self::new(mix_seed(base_seed, replication, algorithm_id))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of uniform draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// One uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.inner.random::<f64>()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a replication index and an algorithm id.
pub fn mix_seed(base_seed: u64, replication: u64, algorithm_id: u64) -> u64 {
    let a = splitmix64(base_seed);
    let b = splitmix64(a ^ replication.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ algorithm_id.wrapping_mul(0xA076_1D64_78BD_642F))
}
