//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator whose 32-byte key is built from the
//! experiment seed, the FNV-1a hash of the stream name, and a sub-stream
//! index. Gaussian draws use the Box–Muller transform on 53-bit uniforms.
//! Same seed and name always give the same sequence on every platform.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ *b as u64).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    name_hash: u64,
    index: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::keyed(seed, fnv1a(b"root"), 0)
    }

    fn keyed(seed: u64, name_hash: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&name_hash.to_le_bytes());
        key[16..24].copy_from_slice(&index.to_le_bytes());
        key[24..].copy_from_slice(b"mdn-rng1");
        Self {
            seed,
            name_hash,
            index,
            inner: ChaCha8Rng::from_seed(key),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream for a named consumer. Does not advance `self`.
    pub fn stream(&self, name: &str) -> Rng {
        let h = fnv1a(name.as_bytes()) ^ self.name_hash.rotate_left(17);
        Self::keyed(self.seed, h, self.index)
    }

    /// The `index`-th sub-stream, used for per-trial or per-item work.
    pub fn fork(&self, index: u64) -> Rng {
        Self::keyed(
            self.seed,
            self.name_hash,
            self.index.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (index.wrapping_add(1)),
        )
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        self.inner.random_range(0..n)
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u keeps the log argument in (0, 1]
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}
