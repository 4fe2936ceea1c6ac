//! Optimality gap of a run against a certified upper bound on `F*`.

use serde::{Deserialize, Serialize};

use crate::algorithms::RunResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapVerdict {
    pub gap: f64,
    /// `gap > eps`.
    pub respected: bool,
}

pub fn gap_verdict(best_value: f64, cert_bound: f64, eps: f64) -> GapVerdict {
    let gap = best_value - cert_bound;
    GapVerdict { gap, respected: gap > eps }
}

pub fn gap_audit(run: &RunResult, cert_bound: f64, eps: f64) -> GapVerdict {
    gap_verdict(run.best_value, cert_bound, eps)
}
