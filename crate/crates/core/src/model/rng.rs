// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TokenId;

/// Seeded, splittable random stream.
///
/// Backed by ChaCha8 with the 64-bit seed expanded by `seed_from_u64` and the
/// stream id selecting one of 2^64 independent keystreams. The same
/// `(seed, stream_id)` pair always reproduces the same draws.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream keyed by this stream's identity and `id`; independent of draws made so far.
    pub fn split(&self, id: u64) -> RandomStream {
        RandomStream::new(derive_seed(self.seed, &[self.stream_id]), id)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform_f64() < p
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        self.rng.random_range(0..n)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "empty range {lo}..={hi}");
        self.rng.random_range(lo..=hi)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of integer labels into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}

/// Deterministic 64-bit hash of `(seed, prefix)`; length-sensitive.
pub fn prefix_hash(seed: u64, prefix: &[TokenId]) -> u64 {
    let mut h = splitmix64(seed ^ 0x6a09_e667_f3bc_c908);
    for &t in prefix {
        h = splitmix64(h ^ u64::from(t).wrapping_add(0x2545_f491_4f6c_dd1d));
    }
    splitmix64(h ^ prefix.len() as u64)
}

/// [`prefix_hash`] mapped to `[0, 1)`.
pub fn hash_unit(seed: u64, prefix: &[TokenId]) -> f64 {
    (prefix_hash(seed, prefix) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
