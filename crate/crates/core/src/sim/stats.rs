use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Summary of per-slot attempt counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRateStats {
    /// Mean number of attempts per packet slot.
    pub mean_attempt_rate: f64,
    /// Unbiased sample variance of the per-slot counts.
    pub variance: f64,
    /// Variance of a binomial count with the same mean over `n` nodes.
    pub binomial_variance: f64,
    /// Fraction of slots with at most `mean + 3 sqrt(mean (1 - mean/n))` attempts.
    pub three_sigma_coverage: f64,
    pub slots: usize,
}

impl AttemptRateStats {
    /// Ratio of the measured variance to the binomial one; `NaN` for a
    /// degenerate trace.
    pub fn variance_ratio(&self) -> f64 {
        self.variance / self.binomial_variance
    }
}

pub fn attempt_rate_stats(trace: &[u32], n: u32) -> Result<AttemptRateStats> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if n == 0 {
        return Err(Error::domain("node count must be positive"));
    }
    let len = trace.len() as f64;
    let mean = trace.iter().map(|&g| g as f64).sum::<f64>() / len;
    let variance = if trace.len() < 2 {
        0.0
    } else {
        trace
            .iter()
            .map(|&g| (g as f64 - mean).powi(2))
            .sum::<f64>()
            / (len - 1.0)
    };
    let binomial_variance = mean * (1.0 - mean / n as f64);
    let bound = mean + 3.0 * binomial_variance.max(0.0).sqrt();
    let covered = trace.iter().filter(|&&g| g as f64 <= bound).count();
    Ok(AttemptRateStats {
        mean_attempt_rate: mean,
        variance,
        binomial_variance,
        three_sigma_coverage: covered as f64 / len,
        slots: trace.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_trace() {
        let s = attempt_rate_stats(&[0; 100], 50).unwrap();
        assert_eq!(s.mean_attempt_rate, 0.0);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.three_sigma_coverage, 1.0);
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(matches!(
            attempt_rate_stats(&[], 50),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn small_trace_by_hand() {
        // mean 1, variance (1 + 1 + 0 + 0)/3, bound 1 + 3 sqrt(1 - 1/4) = 3.598
        let s = attempt_rate_stats(&[0, 2, 1, 1], 4).unwrap();
        assert!((s.mean_attempt_rate - 1.0).abs() < 1e-15);
        assert!((s.variance - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.binomial_variance - 0.75).abs() < 1e-15);
        assert_eq!(s.three_sigma_coverage, 1.0);
        let s = attempt_rate_stats(&[0, 0, 0, 0, 0, 0, 0, 0, 0, 10], 10).unwrap();
        assert!((s.three_sigma_coverage - 0.9).abs() < 1e-15);
    }
}
