//! The minimax certificate across seeds for dense families.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::certificate::dual_certificate;
use crate::error::AuditError;
use crate::geometry::{Exponent, LpSpace};
use crate::instance::{FamilyKind, VectorFamily};

/// `c - eta` with `c = 1/sqrt(2)` and `eta = c/2`.
pub const KHINTCHINE_MARGIN: f64 = 0.5 * std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub eps: f64,
    pub gamma: f64,
    /// `min{1/(200 eps^2), (d/12 - ln(1/gamma)) / ln(3/eps)}`.
    pub max_m: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxAudit {
    pub p: Exponent,
    pub d: usize,
    pub m: usize,
    /// `M^(-1/2) / (2 sqrt 2)`.
    pub threshold: f64,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub below: usize,
    pub fraction_below: f64,
    pub regime: Option<Regime>,
}

pub fn regime(d: usize, m: usize, eps: f64, gamma: f64) -> Regime {
    let max_m = (1.0 / (200.0 * eps * eps)).min((d as f64 / 12.0 - (1.0 / gamma).ln()) / (3.0 / eps).ln());
    Regime { eps, gamma, max_m, holds: m as f64 <= max_m }
}

/// Certificates of dense families for each seed. `regime` is `(eps, gamma)`.
pub fn dense_minimax_audit(
    p: Exponent,
    d: usize,
    m: usize,
    seeds: &[u64],
    regime_of: Option<(f64, f64)>,
) -> Result<MinimaxAudit, AuditError> {
    if !matches!(p, Exponent::Finite(v) if v > 1.0 && v <= 2.0) {
        return Err(AuditError::InvalidInput(format!("dense minimax audit needs p in (1, 2], got {}", p.value())));
    }
    if m == 0 || seeds.is_empty() {
        return Err(AuditError::InvalidInput("need M >= 1 and at least one seed".into()));
    }
    let space = LpSpace::new(d, p)?;
    let values = seeds
        .par_iter()
        .map(|&s| {
            let f = VectorFamily::sample(space, FamilyKind::Dense, m, d, s)?;
            Ok(dual_certificate(&f)?.value)
        })
        .collect::<Result<Vec<f64>, AuditError>>()?;
    let threshold = KHINTCHINE_MARGIN / (m as f64).sqrt();
    let below = values.iter().filter(|&&v| v < threshold).count();
    Ok(MinimaxAudit {
        p,
        d,
        m,
        threshold,
        seeds: seeds.to_vec(),
        fraction_below: below as f64 / values.len() as f64,
        values,
        below,
        regime: regime_of.map(|(e, g)| regime(d, m, e, g)),
    })
}
