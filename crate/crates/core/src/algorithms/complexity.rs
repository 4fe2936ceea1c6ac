//! Empirical plug-in estimates of the high-probability and mean complexity.

use serde::{Deserialize, Serialize};

use super::RunResult;
use crate::error::AlgorithmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub runs: usize,
    /// Runs that never reached the target; counted as infinite.
    pub censored: usize,
    pub eps: f64,
    pub gamma: f64,
    /// Empirical `(1 - gamma)`-quantile of the rounds-to-target.
    pub high_probability: f64,
    /// Empirical `gamma`-quantile, for comparison.
    pub low_quantile: f64,
    pub mean: f64,
    /// `(1 - gamma) * high_probability <= mean`.
    pub inequality_holds: bool,
}

/// The `q`-quantile by the lower-index rule `sorted[ceil(q n) - 1]`.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let idx = ((q * n as f64 - 1e-9).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Estimates from rounds-to-target samples, `None` meaning not reached.
pub fn estimate_from_rounds(rounds: &[Option<usize>], eps: f64, gamma: f64) -> Result<ComplexityEstimate, AlgorithmError> {
    if rounds.is_empty() {
        return Err(AlgorithmError::Empty);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(AlgorithmError::InvalidConfig(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let mut t: Vec<f64> = rounds.iter().map(|r| r.map_or(f64::INFINITY, |v| v as f64)).collect();
    t.sort_by(f64::total_cmp);
    let censored = rounds.iter().filter(|r| r.is_none()).count();
    let high_probability = empirical_quantile(&t, 1.0 - gamma);
    let mean = if censored > 0 { f64::INFINITY } else { t.iter().sum::<f64>() / t.len() as f64 };
    Ok(ComplexityEstimate {
        runs: t.len(),
        censored,
        eps,
        gamma,
        high_probability,
        low_quantile: empirical_quantile(&t, gamma),
        mean,
        inequality_holds: (1.0 - gamma) * high_probability <= mean * (1.0 + 1e-12),
    })
}

/// Estimates over runs that all targeted the same `eps`.
pub fn estimate_complexity(results: &[RunResult], eps: f64, gamma: f64) -> Result<ComplexityEstimate, AlgorithmError> {
    for r in results {
        if (r.eps - eps).abs() > 1e-15 * eps.abs().max(1.0) {
            return Err(AlgorithmError::TargetMismatch(r.eps, eps));
        }
    }
    let rounds: Vec<Option<usize>> = results.iter().map(|r| r.reached_at).collect();
    estimate_from_rounds(&rounds, eps, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rounds() {
        let e = estimate_from_rounds(&[Some(3); 7], 0.1, 0.1).unwrap();
        assert_eq!((e.high_probability, e.mean), (3.0, 3.0));
    }

    #[test]
    fn quantile_and_mean_by_hand() {
        let r: Vec<Option<usize>> = [1, 2, 3, 4, 5, 6, 7, 8, 9, 100].iter().map(|v| Some(*v)).collect();
        let e = estimate_from_rounds(&r, 0.1, 0.1).unwrap();
        assert_eq!(e.high_probability, 9.0);
        assert_eq!(e.mean, 14.5);
        assert_eq!(e.low_quantile, 1.0);
        assert!(e.inequality_holds);
    }

    #[test]
    fn censoring_and_empty_input() {
        let e = estimate_from_rounds(&[Some(2), None], 0.1, 0.4).unwrap();
        assert_eq!(e.censored, 1);
        assert!(e.mean.is_infinite());
        assert!(matches!(estimate_from_rounds(&[], 0.1, 0.1), Err(AlgorithmError::Empty)));
    }
}
