//! Monte Carlo tails of `<z, x>` for fresh sign vectors.

use serde::{Deserialize, Serialize};

use crate::error::AuditError;
use crate::geometry::lp_norm;
use crate::instance::{entry_magnitude, FamilyKind, InstancePlan};
use crate::instance::signs::{signed_sum, SignSource};

pub const MIN_SAMPLES: usize = 1000;
/// Normal quantile for 95% Wilson intervals.
pub const WILSON_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub delta: f64,
    /// Empirical `P[<z, x> >= delta]`.
    pub upper_tail: f64,
    /// Empirical `P[<z, x> <= -delta]`.
    pub lower_tail: f64,
    pub upper_wilson: [f64; 2],
    pub lower_wilson: [f64; 2],
    /// `exp(-alpha delta^2)`.
    pub bound: f64,
    /// Hoeffding's bound `exp(-delta^2 / (2 sum_j c_j^2))` for this `x`.
    pub hoeffding: f64,
    /// A Wilson lower end exceeds `bound`.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<TailRow>,
    pub any_flag: bool,
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> [f64; 2] {
    let n = n as f64;
    let ph = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (ph + z2 / (2.0 * n)) / denom;
    let half = z / denom * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
    [(center - half).max(0.0), (center + half).min(1.0)]
}

/// Tails of `<z, x>` over `samples` fresh vectors drawn like `z^1` of `plan`.
pub fn concentration_audit(
    plan: &InstancePlan,
    x: &[f64],
    deltas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ConcentrationReport, AuditError> {
    plan.space().check(x)?;
    if samples < MIN_SAMPLES {
        return Err(AuditError::InvalidInput(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    let feasible = plan.feasible_set();
    if !feasible.contains(x, 1e-9) {
        return Err(AuditError::InfeasibleProbe { gauge: feasible.gauge(x), radius: feasible.radius() });
    }
    let len = match plan.kind {
        FamilyKind::Disjoint => plan.block,
        _ => plan.d,
    };
    let mag = entry_magnitude(len, plan.p);
    let head = &x[..len];
    let source = SignSource::new(seed);
    let values: Vec<f64> = (0..samples as u64)
        .map(|i| mag * signed_sum(&source.row(i + 1, len), head))
        .collect();
    let var = mag * mag * lp_norm(head, crate::geometry::Exponent::two()).powi(2);
    let rows: Vec<TailRow> = deltas
        .iter()
        .map(|&delta| {
            let up = values.iter().filter(|&&v| v >= delta).count();
            let lo = values.iter().filter(|&&v| v <= -delta).count();
            let upper_wilson = wilson_interval(up, samples, WILSON_Z);
            let lower_wilson = wilson_interval(lo, samples, WILSON_Z);
            let bound = (-plan.alpha * delta * delta).exp();
            let hoeffding = if var > 0.0 { (-delta * delta / (2.0 * var)).exp() } else { 0.0 };
            TailRow {
                delta,
                upper_tail: up as f64 / samples as f64,
                lower_tail: lo as f64 / samples as f64,
                upper_wilson,
                lower_wilson,
                bound,
                hoeffding,
                flagged: upper_wilson[0].max(lower_wilson[0]) > bound,
            }
        })
        .collect();
    let any_flag = rows.iter().any(|r| r.flagged);
    Ok(ConcentrationReport { alpha: plan.alpha, samples, seed, rows, any_flag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{plan_parameters, Mode, Setting};

    fn dense_plan(d: usize) -> InstancePlan {
        let mut s = Setting::new(crate::geometry::Exponent::two(), d, 1, 0.05, 0.05);
        s.mode = Mode::Demonstration;
        s.m = Some(2);
        plan_parameters(&s).unwrap()
    }

    #[test]
    fn wilson_interval_brackets_the_estimate() {
        let [lo, hi] = wilson_interval(30, 100, WILSON_Z);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson_interval(0, 100, WILSON_Z)[0], 0.0);
    }

    #[test]
    fn coordinate_probe_has_no_mass_beyond_its_entry() {
        let plan = dense_plan(100);
        let mut x = vec![0.0; 100];
        x[0] = 1.0;
        let r = concentration_audit(&plan, &x, &[0.2], 2000, 3).unwrap();
        assert_eq!(r.rows[0].upper_tail, 0.0);
        assert_eq!(r.rows[0].lower_tail, 0.0);
        assert!(!r.any_flag);
    }

    #[test]
    fn uniform_probe_at_half() {
        let plan = dense_plan(100);
        let x = vec![0.1; 100];
        let r = concentration_audit(&plan, &x, &[0.5], 10_000, 4).unwrap();
        assert_eq!(r.rows[0].upper_tail, 0.0);
        assert!(r.rows[0].bound < 1e-10);
    }

    #[test]
    fn rejects_infeasible_points_and_small_samples() {
        let plan = dense_plan(10);
        let x = vec![1.0; 10];
        assert!(matches!(concentration_audit(&plan, &x, &[0.1], 1000, 1), Err(AuditError::InfeasibleProbe { .. })));
        assert!(matches!(concentration_audit(&plan, &[0.0; 10], &[0.1], 10, 1), Err(AuditError::InvalidInput(_))));
    }
}
