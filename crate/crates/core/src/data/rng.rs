//! Deterministic random streams.
//!
//! Everything stochastic in the crate draws from ChaCha8 addressed by a
//! `(seed, stream)` pair. ChaCha is a counter-based generator with identical
//! output on every platform, and the samplers below spell out the mapping
//! from raw 64-bit words to samples so no external library change can move
//! the results.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids separating unrelated consumers of one run seed.
///
/// Two consumers on different streams of the same seed see statistically
/// independent output, so adding a draw in one place never perturbs another.
pub mod streams {
    /// Train/test and fold permutations.
    pub const SPLIT: u64 = 1;
    /// Baseline target model construction (random prototypes or features).
    pub const BASELINE: u64 = 2;
    /// Procedure-internal randomness.
    pub const PROCEDURE: u64 = 3;
    /// Robust set generation.
    pub const ROBUSTNESS: u64 = 4;
    /// Synthetic dataset structure (cluster centers, coefficients).
    pub const DATASET: u64 = 5;
    /// Kernel bandwidth subsampling.
    pub const BANDWIDTH: u64 = 6;
    /// Synthetic dataset point draws.
    pub const SAMPLE: u64 = 7;
}

/// A ChaCha8 generator positioned on `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw from `[0, 1)` with 53 bits of precision.
pub fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `[0, bound)`.
///
/// Rejection sampling on the top of the 64-bit range keeps every index
/// exactly equally likely; the modulo shortcut would bias small indices.
pub fn uniform_index(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    assert!(bound > 0, "uniform_index: bound must be positive");
    let bound = bound as u64;
    // 2^64 mod bound, computed without overflowing u64.
    let rem = (u64::MAX % bound + 1) % bound;
    loop {
        let x = rng.next_u64();
        if rem == 0 || x <= u64::MAX - rem {
            return (x % bound) as usize;
        }
    }
}

/// Standard normal via Box-Muller. One draw consumes two uniforms; the sine
/// half of the pair is discarded to keep the sampler stateless.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform_f64(rng); // (0, 1], keeps ln finite
    let u2 = uniform_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `m` distinct indices drawn uniformly from `[0, n)`, by partial
/// Fisher-Yates. Order of the result is the draw order.
pub fn sample_without_replacement(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<usize> {
    assert!(m <= n, "sample_without_replacement: m={m} exceeds n={n}");
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = i + uniform_index(rng, n - i);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool
}

/// Uniform random permutation of `[0, n)`.
pub fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    sample_without_replacement(rng, n, n)
}

/// Index drawn according to a cumulative probability table.
///
/// `cumulative` must be nondecreasing with final entry (approximately) 1;
/// the final bucket absorbs any rounding slack.
pub fn weighted_index(rng: &mut ChaCha8Rng, cumulative: &[f64]) -> usize {
    debug_assert!(!cumulative.is_empty());
    let u = uniform_f64(rng);
    match cumulative.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
        Ok(i) => (i + 1).min(cumulative.len() - 1),
        Err(i) => i.min(cumulative.len() - 1),
    }
}

/// Running-sum table for [`weighted_index`].
pub fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream_reproduces() {
        let a: Vec<u64> = (0..32).map(|_| stream_rng(7, streams::SPLIT).next_u64()).collect();
        let b: Vec<u64> = (0..32).map(|_| stream_rng(7, streams::SPLIT).next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn different_streams_differ() {
        let mut a = stream_rng(7, streams::SPLIT);
        let mut b = stream_rng(7, streams::BASELINE);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn uniform_index_covers_range_evenly() {
        let mut rng = stream_rng(11, 0);
        let mut counts = [0usize; 7];
        for _ in 0..70_000 {
            counts[uniform_index(&mut rng, 7)] += 1;
        }
        for &c in &counts {
            // each bucket expects 10_000; 4 sigma is about 390
            assert!((c as i64 - 10_000).abs() < 500, "skewed bucket: {counts:?}");
        }
    }

    #[test]
    fn uniform_index_bound_one_is_zero() {
        let mut rng = stream_rng(0, 0);
        for _ in 0..10 {
            assert_eq!(uniform_index(&mut rng, 1), 0);
        }
    }

    #[test]
    fn sample_without_replacement_is_distinct_and_in_range() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..100 {
            let s = sample_without_replacement(&mut rng, 20, 12);
            assert_eq!(s.len(), 12);
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 12);
            assert!(s.iter().all(|&i| i < 20));
        }
    }

    #[test]
    fn permutation_hits_every_element() {
        let mut rng = stream_rng(5, 0);
        let mut p = permutation(&mut rng, 50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn standard_normal_moments() {
        let mut rng = stream_rng(13, 0);
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let z = standard_normal(&mut rng);
            sum += z;
            sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn weighted_index_matches_probabilities() {
        let probs = [0.5, 0.25, 0.125, 0.125];
        let cum = cumulative(&probs);
        let mut rng = stream_rng(17, 0);
        let mut counts = [0usize; 4];
        for _ in 0..80_000 {
            counts[weighted_index(&mut rng, &cum)] += 1;
        }
        for (i, &p) in probs.iter().enumerate() {
            let expect = p * 80_000.0;
            assert!(
                (counts[i] as f64 - expect).abs() < 5.0 * (expect * (1.0 - p)).sqrt(),
                "bucket {i}: {} vs {expect}",
                counts[i]
            );
        }
    }
}
