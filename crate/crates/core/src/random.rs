//! Deterministic random source shared by every stochastic operator.
//!
//! A [`RandomSource`] is a ChaCha8 generator keyed by a 64-bit seed. Ensemble
//! realization `k` uses the same key with ChaCha stream id `k`, so every run
//! owns an independent stream that does not depend on how runs are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    /// Stream 0 of `seed`.
    pub fn new(seed: u64) -> Self {
        Self::stream(seed, 0)
    }

    /// Independent sub-stream `index` of `seed`.
    pub fn stream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform in the open interval `(lo, hi)`.
    pub fn uniform_open(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let v = lo + (hi - lo) * self.uniform();
            if v > lo && v < hi {
                return v;
            }
        }
    }

    /// Uniform in the closed interval `[lo, hi]`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        (lo + (hi - lo) * self.uniform()).clamp(lo, hi)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

/// SplitMix64 finalizer, used to derive unrelated seeds from a base seed.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
