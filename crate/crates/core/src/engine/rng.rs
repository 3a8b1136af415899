//! Counter-based random streams.
//!
//! Every Monte Carlo path owns a ChaCha8 stream selected by `(seed, key)`.
//! The generator state is a pure function of the key and the number of draws,
//! so results never depend on which thread simulates which path.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::erf::erfc_inv;

const TWO_POW_M53: f64 = 1.0 / 9_007_199_254_740_992.0;

/// A source of per-step noise for the simulation schemes.
pub trait NoiseSource {
    /// Uniform on `[0, 1)`.
    fn uniform(&mut self) -> f64;
    /// Standard normal.
    fn normal(&mut self) -> f64;
    /// Fair coin in `{0, 1}`.
    fn coin(&mut self) -> u8;
}

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, key: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(key);
        Self { inner }
    }

    /// Stream for path `path` of a run seeded with `seed`.
    pub fn for_path(seed: u64, path: u64) -> Self {
        Self::new(seed, path)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn open_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * TWO_POW_M53
    }
}

impl NoiseSource for StreamRng {
    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    fn normal(&mut self) -> f64 {
        inverse_normal_cdf(self.open_uniform())
    }

    fn coin(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }
}

/// `Phi^{-1}(p)` for `p in (0, 1)`, to about `1e-10` relative in `p`.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}
