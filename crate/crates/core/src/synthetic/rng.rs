use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::pillar_index::{int_hash, GOLDEN_64};

/// Gaussian source for range jitter.
///
/// The stream is xoshiro256++ whose state is filled by SplitMix64 from a
/// 64-bit seed. Uniforms take the top 53 bits of each output; normals use
/// the cosine branch of Box-Muller, two uniforms per sample.
#[derive(Debug, Clone)]
pub struct JitterRng {
    inner: Xoshiro256PlusPlus,
}

impl JitterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Independent substream for one scan: the seed of scan `k` is the SplitMix64
/// finalizer of `seed + (k + 1) * golden`.
pub fn scan_stream(seed: u64, scan: u64) -> JitterRng {
    let mixed = seed.wrapping_add(scan.wrapping_add(1).wrapping_mul(GOLDEN_64));
    JitterRng::new(int_hash(mixed as i64))
}
