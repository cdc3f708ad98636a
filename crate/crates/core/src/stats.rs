//! Small numeric helpers shared by the analytic models.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile for `p` in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Probability that at least `k` of independent Bernoulli trials with
/// success probabilities `probs` succeed (exact Poisson-binomial sum).
pub fn at_least_k_of(probs: &[f64], k: usize) -> f64 {
    // dist[j] = P(exactly j successes so far)
    let mut dist = vec![0.0; probs.len() + 1];
    dist[0] = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        for j in (0..=i + 1).rev() {
            let stay = dist[j] * (1.0 - p);
            let moved = if j > 0 { dist[j - 1] * p } else { 0.0 };
            dist[j] = stay + moved;
        }
    }
    dist.iter().skip(k).sum::<f64>().clamp(0.0, 1.0)
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for n < 2).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    // brute-force enumeration over all 2^n outcomes
    fn enumerate_at_least(probs: &[f64], k: usize) -> f64 {
        let n = probs.len();
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize >= k)
            .map(|m| {
                (0..n)
                    .map(|i| if m >> i & 1 == 1 { probs[i] } else { 1.0 - probs[i] })
                    .product::<f64>()
            })
            .sum()
    }

    #[test]
    fn poisson_binomial_matches_enumeration() {
        let probs = [0.99, 0.31, 0.5, 0.02, 0.87, 0.6];
        for k in 0..=probs.len() + 1 {
            let a = at_least_k_of(&probs, k);
            let b = enumerate_at_least(&probs, k);
            assert!((a - b).abs() < 1e-12, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn normal_helpers() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(-1.959963984540054) - 0.025).abs() < 1e-9);
        for p in [0.01, 0.2, 0.5, 0.9] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_std_basic() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.2909944487358056).abs() < 1e-12);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }
}
