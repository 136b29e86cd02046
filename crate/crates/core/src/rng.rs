//! Seeded, splittable random streams.
//!
//! Every stochastic operation takes an explicit [`RandomSource`]. Child
//! streams are derived from the parent's seed and a caller-chosen index only,
//! so a set of tasks produces the same numbers no matter which thread runs
//! which task or in which order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    inner: ChaCha8Rng,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        ALGORITHM
    }

    /// Independent child stream keyed by `index`. Does not depend on how many
    /// numbers have been drawn from `self`.
    pub fn split(&self, index: u64) -> RandomSource {
        let child = splitmix64(self.seed ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)));
        RandomSource::new(child)
    }

    /// Child stream keyed by a short path, e.g. `&[realization, pattern]`.
    pub fn split_path(&self, path: &[u64]) -> RandomSource {
        path.iter().fold(self.clone(), |acc, &i| acc.split(i))
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
