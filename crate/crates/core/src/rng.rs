//! Deterministic random streams.
//!
//! Every random draw in the crate goes through [`SeededRng`], a ChaCha8
//! stream cipher generator (`rand_chacha::ChaCha8Rng`) keyed by
//! `SeedableRng::seed_from_u64(seed)`. The derived draws are defined here
//! rather than delegated to a distribution library so that their values are
//! fixed by this file alone:
//!
//! * [`SeededRng::uniform`]: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.
//! * [`SeededRng::below`]: rejection sampling on `next_u64`, unbiased.
//! * [`SeededRng::exponential`]: `-ln(1 - uniform)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Reproducible random stream; identical seeds give bitwise-identical draws.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

/// Opens the random stream for `seed`.
pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::new(seed)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[low, high)`.
    #[inline]
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) is empty");
        // Largest multiple of n that fits; draws at or above it are rejected.
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Unit-rate exponential draw.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }

    /// Flat Dirichlet draw of length `k` (normalized exponentials).
    pub fn flat_dirichlet(&mut self, k: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..k).map(|_| self.exponential()).collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        } else {
            v.iter_mut().for_each(|x| *x = 1.0 / k as f64);
        }
        v
    }
}
