//! Exact Zipf sampling by inverse CDF.
//!
//! P(i) is proportional to 1/(i+1)^theta for i in [0, n). The cumulative
//! weights are precomputed once and each draw is a binary search, so there
//! is no rejection step and the empirical distribution matches the analytic
//! one to floating-point precision. theta = 0 degenerates to uniform.

use rand::Rng;

#[derive(Debug, Clone)]
pub struct ZipfSampler {
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(n: usize, theta: f64) -> Self {
        assert!(n >= 1, "zipf needs at least one element");
        assert!(theta >= 0.0, "theta must be non-negative");
        let mut cdf = Vec::with_capacity(n);
        let mut total = 0.0f64;
        for i in 0..n {
            total += 1.0 / ((i + 1) as f64).powf(theta);
            cdf.push(total);
        }
        for w in &mut cdf {
            *w /= total;
        }
        ZipfSampler { cdf }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Exact probability of index `i`, for analytic comparisons.
    pub fn probability(&self, i: usize) -> f64 {
        let lo = if i == 0 { 0.0 } else { self.cdf[i - 1] };
        self.cdf[i] - lo
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let r: f64 = rng.gen();
        self.cdf.partition_point(|&c| c < r).min(self.cdf.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn theta_zero_is_uniform() {
        let sampler = ZipfSampler::new(4, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut counts = [0u64; 4];
        let n = 1_000_000;
        for _ in 0..n {
            counts[sampler.sample(&mut rng)] += 1;
        }
        for c in counts {
            let frac = c as f64 / n as f64;
            assert!((frac - 0.25).abs() < 0.01, "counts {counts:?}");
        }
    }

    #[test]
    fn two_elements_theta_one_has_ratio_two() {
        // P(0)/P(1) = (1/1) / (1/2) = 2 by direct summation of the CDF.
        let sampler = ZipfSampler::new(2, 1.0);
        assert!((sampler.probability(0) / sampler.probability(1) - 2.0).abs() < 1e-12);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut counts = [0u64; 2];
        for _ in 0..1_000_000 {
            counts[sampler.sample(&mut rng)] += 1;
        }
        let ratio = counts[0] as f64 / counts[1] as f64;
        assert!((ratio - 2.0).abs() < 0.05, "observed ratio {ratio}");
    }

    #[test]
    fn same_seed_same_sequence() {
        let sampler = ZipfSampler::new(100, 0.99);
        let draw = |seed: u64| -> Vec<usize> {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            (0..1000).map(|_| sampler.sample(&mut rng)).collect()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }
}
