//! Seeded, labelled random-number streams.
//!
//! Every consumer of randomness owns a stream identified by `(seed, label)`.
//! The same `(seed, label, draw index)` triple yields the same value on every
//! run and platform: streams are ChaCha12 keyed from the seed and a stable
//! hash of the label, and all floating-point mappings are done here rather
//! than delegated to distribution crates.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DrawError {
    #[error("exponential mean must be positive, got {0}")]
    NonPositiveMean(f64),
}

/// FNV-1a, fixed here so stream keying never depends on `std` hasher details.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub struct RngStream {
    seed: u64,
    label: String,
    rng: ChaCha12Rng,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let label_hash = fnv1a64(label.as_bytes());
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&label_hash.to_le_bytes());
        key[16..24].copy_from_slice(&(label.len() as u64).to_le_bytes());
        RngStream {
            seed,
            label,
            rng: ChaCha12Rng::from_seed(key),
            draws: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of draws taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform in [0, 1), using the top 53 bits of a 64-bit word.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponentially distributed value with the given mean, by inverse
    /// transform. Errors on a non-positive mean.
    pub fn exponential(&mut self, mean: f64) -> Result<f64, DrawError> {
        if !(mean > 0.0) {
            return Err(DrawError::NonPositiveMean(mean));
        }
        let u = self.uniform();
        Ok(-mean * (1.0 - u).ln())
    }

    /// Index into `weights` drawn proportionally to the weights.
    /// Weights must be non-negative with a positive sum.
    pub fn weighted_index(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0, "weighted_index needs a positive total weight");
        let mut target = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            if target < w {
                return i;
            }
            target -= w;
        }
        weights.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_label_reproduce_the_stream() {
        let mut a = RngStream::new(42, "arrivals");
        let mut b = RngStream::new(42, "arrivals");
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn different_labels_give_independent_streams() {
        let mut a = RngStream::new(42, "arrivals");
        let mut b = RngStream::new(42, "service");
        let first: Vec<u64> = (0..8).map(|_| a.uniform().to_bits()).collect();
        let second: Vec<u64> = (0..8).map(|_| b.uniform().to_bits()).collect();
        assert_ne!(first, second);
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut stream = RngStream::new(7, "u");
        for _ in 0..10_000 {
            let u = stream.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    // Law-of-large-numbers check: 1e5 exponential draws with mean 10 must
    // average within 2% of 10.
    #[test]
    fn exponential_sample_mean_matches_parameter() {
        let mut stream = RngStream::new(1234, "exp");
        let n = 100_000;
        let sum: f64 = (0..n).map(|_| stream.exponential(10.0).unwrap()).sum();
        let mean = sum / n as f64;
        assert!((mean - 10.0).abs() / 10.0 < 0.02, "sample mean {mean}");
    }

    #[test]
    fn non_positive_mean_is_an_error() {
        let mut stream = RngStream::new(1, "e");
        assert_eq!(stream.exponential(0.0), Err(DrawError::NonPositiveMean(0.0)));
        assert_eq!(stream.exponential(-2.0), Err(DrawError::NonPositiveMean(-2.0)));
    }

    #[test]
    fn weighted_index_respects_degenerate_mix() {
        let mut stream = RngStream::new(5, "mix");
        for _ in 0..100 {
            assert_eq!(stream.weighted_index(&[0.0, 1.0, 0.0]), 1);
        }
    }

    #[test]
    fn weighted_index_roughly_matches_weights() {
        let mut stream = RngStream::new(9, "mix2");
        let weights = [40.0, 30.0, 30.0];
        let mut counts = [0u32; 3];
        let n = 30_000;
        for _ in 0..n {
            counts[stream.weighted_index(&weights)] += 1;
        }
        for (count, weight) in counts.iter().zip(weights) {
            let expected = n as f64 * weight / 100.0;
            assert!((*count as f64 - expected).abs() < 4.0 * (expected).sqrt() + 50.0);
        }
    }
}
