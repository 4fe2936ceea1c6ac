//! Size of the lattice net on the simplex against `(3/eps)^M`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::AuditError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsNetCount {
    pub m: usize,
    pub eps: f64,
    /// `N = ceil(M / eps)`.
    pub grid: u64,
    /// `C(N + M, M)` as a decimal string.
    pub exact: String,
    /// `(3/eps)^M`.
    pub bound: f64,
    pub holds: bool,
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k.min(n));
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

pub fn epsnet_count(m: usize, eps: f64) -> Result<EpsNetCount, AuditError> {
    if m == 0 || !(eps > 0.0 && eps <= 1.0) {
        return Err(AuditError::InvalidInput(format!("need M >= 1 and eps in (0, 1], got M={m}, eps={eps}")));
    }
    let grid = (m as f64 / eps * (1.0 - 1e-12)).ceil() as u64;
    let exact = binomial(grid + m as u64, m as u64);
    let ratio = 3.0 / eps;
    let holds = if (ratio - ratio.round()).abs() < 1e-12 {
        exact <= BigUint::from(ratio.round() as u64).pow(m as u32)
    } else {
        exact.to_f64().unwrap_or(f64::INFINITY) <= ratio.powi(m as i32)
    };
    Ok(EpsNetCount { m, eps, grid, exact: exact.to_string(), bound: ratio.powi(m as i32), holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let c = epsnet_count(2, 1.0).unwrap();
        assert_eq!((c.exact.as_str(), c.bound, c.holds), ("6", 9.0, true));
        let c = epsnet_count(1, 1.0).unwrap();
        assert_eq!((c.exact.as_str(), c.bound), ("2", 3.0));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(10, 5), BigUint::from(252u32));
        assert_eq!(binomial(40, 20).to_string(), "137846528820");
    }
}
