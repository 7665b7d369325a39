//! Per-path Gaussian stream. Each path owns a ChaCha8 stream selected by
//! its index under a key derived from the seed; step `k` consumes the
//! 64-bit word pair at position `2k`, so any (seed, path, step) draw can
//! be reproduced without replaying the others.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone)]
pub struct PathRng {
    inner: ChaCha8Rng,
    normal: Normal,
}

impl PathRng {
    pub fn new(seed: u64, path: u64) -> PathRng {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(path);
        inner.set_word_pos(0);
        PathRng {
            inner,
            normal: Normal::standard(),
        }
    }

    /// Positions the stream at step `k`.
    pub fn seek(&mut self, step: u64) {
        self.inner.set_word_pos(2 * u128::from(step));
    }

    /// Uniform in the open interval (0, 1) from the top 53 bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inverse CDF of one uniform.
    pub fn normal(&mut self) -> f64 {
        let u = self.uniform();
        self.normal.inverse_cdf(u)
    }
}

/// The draw a path would see at step `k`.
pub fn normal_at(seed: u64, path: u64, step: u64) -> f64 {
    let mut r = PathRng::new(seed, path);
    r.seek(step);
    r.normal()
}
