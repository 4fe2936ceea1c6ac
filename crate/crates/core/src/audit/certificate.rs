//! The minimax certificate `min_{lambda in simplex} ||sum_i lambda_i z^i||_{p*}`.

use serde::{Deserialize, Serialize};

use crate::error::AuditError;
use crate::geometry::{dot, lp_norm, norming_functional, project_simplex, Exponent};
use crate::instance::{FamilyKind, VectorFamily};

pub const CERTIFICATE_TOL: f64 = 1e-7;
pub const CERTIFICATE_CAP: usize = 20_000;
/// Grid resolution used by the fallback for nonsmooth norms with `M <= 3`.
const GRID_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Best value found (an upper bound on the minimum).
    pub value: f64,
    /// Certified lower bound on the minimum.
    pub lower_bound: f64,
    pub gap: f64,
    pub lambda: Vec<f64>,
    pub iterations: usize,
}

struct Probe {
    norm: f64,
    /// Gradient of `||v||^2 / 2` in `lambda`.
    grad: Vec<f64>,
    /// `min_i <z^i, u>` for a norming functional `u` of `v`.
    lower: f64,
}

/// Certificate for `family` in the dual norm of its space.
pub fn dual_certificate(family: &VectorFamily) -> Result<Certificate, AuditError> {
    dual_certificate_with(family, CERTIFICATE_TOL, CERTIFICATE_CAP)
}

pub fn dual_certificate_with(family: &VectorFamily, tol: f64, cap: usize) -> Result<Certificate, AuditError> {
    simplex_certificate(family, family.p().dual(), tol, cap)
}

/// `min_{lambda in simplex} ||sum_i lambda_i z^i||_q`.
pub fn simplex_certificate(family: &VectorFamily, q: Exponent, tol: f64, cap: usize) -> Result<Certificate, AuditError> {
    let m = family.len();
    if m == 0 {
        return Err(AuditError::InvalidInput("the family is empty".into()));
    }
    if m == 1 {
        let n = lp_norm(&family.vector(1), q);
        return Ok(Certificate { value: n, lower_bound: n, gap: 0.0, lambda: vec![1.0], iterations: 0 });
    }
    let gram = (q == Exponent::two()).then(|| family.gram());
    let probe = |lambda: &[f64]| -> Probe {
        if let Some(g) = &gram {
            let gl: Vec<f64> = g.iter().map(|row| dot(row, lambda)).collect();
            let norm = dot(&gl, lambda).max(0.0).sqrt();
            let lower = if norm > 0.0 { gl.iter().cloned().fold(f64::INFINITY, f64::min) / norm } else { 0.0 };
            return Probe { norm, grad: gl, lower };
        }
        let v = family.combination(lambda);
        let norm = lp_norm(&v, q);
        let u = norming_functional(&v, q);
        let zu: Vec<f64> = (1..=m).map(|i| family.inner(i, &u)).collect();
        let lower = zu.iter().cloned().fold(f64::INFINITY, f64::min);
        Probe { norm, grad: zu.iter().map(|x| x * norm).collect(), lower }
    };
    let smooth = matches!(q, Exponent::Finite(v) if v > 1.0);
    let mut lambda = vec![1.0 / m as f64; m];
    let mut cur = probe(&lambda);
    let mut best = (cur.norm, lambda.clone());
    let mut lower = cur.lower;
    let mut iterations = 0;
    if smooth {
        let mut step = 1.0;
        while iterations < cap && best.0 - lower > tol {
            iterations += 1;
            let half_sq = 0.5 * cur.norm * cur.norm;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = lambda.iter().zip(&cur.grad).map(|(l, g)| l - step * g).collect();
                let cand = project_simplex(&trial);
                let diff: Vec<f64> = cand.iter().zip(&lambda).map(|(a, b)| a - b).collect();
                let dd = dot(&diff, &diff);
                if dd == 0.0 {
                    break;
                }
                let next = probe(&cand);
                if 0.5 * next.norm * next.norm <= half_sq + dot(&cur.grad, &diff) + dd / (2.0 * step) + 1e-16 {
                    accepted = Some((cand, next, diff, dd));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, next, diff, dd)) = accepted else { break };
            let yd: f64 = next.grad.iter().zip(&cur.grad).zip(&diff).map(|((a, b), s)| (a - b) * s).sum();
            step = if yd > 0.0 { (dd / yd).clamp(1e-10, 1e10) } else { (2.0 * step).min(1e10) };
            lambda = cand;
            cur = next;
            lower = lower.max(cur.lower);
            if cur.norm < best.0 {
                best = (cur.norm, lambda.clone());
            }
        }
    } else {
        if m <= 3 {
            let (v, l) = simplex_grid(m, GRID_STEPS, |l| probe(l).norm);
            if v < best.0 {
                best = (v, l.clone());
                lambda = l;
                cur = probe(&lambda);
            }
        }
        let scale = best.0.max(1e-12);
        while iterations < cap && best.0 - lower > tol {
            iterations += 1;
            let gn = lp_norm(&cur.grad, Exponent::two());
            if gn == 0.0 {
                break;
            }
            let step = scale / (gn * (iterations as f64).sqrt());
            let trial: Vec<f64> = lambda.iter().zip(&cur.grad).map(|(l, g)| l - step * g).collect();
            lambda = project_simplex(&trial);
            cur = probe(&lambda);
            lower = lower.max(cur.lower);
            if cur.norm < best.0 {
                best = (cur.norm, lambda.clone());
            }
        }
        if best.0 - lower > tol {
            if let Some((value, l)) = piecewise_linear_optimum(family, q) {
                let norm = probe(&l).norm;
                if norm <= best.0 {
                    best = (norm, l);
                }
                lower = lower.max(value.min(norm));
            }
        }
    }
    let gap = (best.0 - lower).max(0.0);
    if gap > tol {
        return Err(AuditError::CertificateGap { best_value: best.0, gap, iterations });
    }
    Ok(Certificate { value: best.0, lower_bound: lower, gap, lambda: best.1, iterations })
}

/// Solves the `q in {1, inf}` problem as a linear program; `None` if the
/// solver fails.
fn piecewise_linear_optimum(family: &VectorFamily, q: Exponent) -> Option<(f64, Vec<f64>)> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let (m, d) = (family.len(), family.dim());
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let lambda: Vec<_> = (0..m).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let t: Vec<_> = match q {
        Exponent::Infinity => vec![lp.add_var(1.0, (0.0, f64::INFINITY))],
        _ => (0..d).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect(),
    };
    lp.add_constraint(lambda.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
    for j in 0..d {
        let tj = t[j.min(t.len() - 1)];
        for sign in [1.0, -1.0] {
            let mut row: Vec<_> = (0..m).map(|i| (lambda[i], -sign * family.entry(i + 1, j))).collect();
            row.push((tj, 1.0));
            lp.add_constraint(row, ComparisonOp::Ge, 0.0);
        }
    }
    let sol = lp.solve().ok()?;
    let l: Vec<f64> = lambda.iter().map(|&v| sol[v].max(0.0)).collect();
    Some((sol.objective(), project_simplex(&l)))
}

/// Minimum of `f` over the simplex grid `{k / steps}`, for `m <= 3`.
pub fn simplex_grid<F: Fn(&[f64]) -> f64>(m: usize, steps: usize, f: F) -> (f64, Vec<f64>) {
    let s = steps as f64;
    let mut best = (f64::INFINITY, vec![]);
    let mut visit = |l: Vec<f64>| {
        let v = f(&l);
        if v < best.0 {
            best = (v, l);
        }
    };
    match m {
        1 => visit(vec![1.0]),
        2 => (0..=steps).for_each(|a| visit(vec![a as f64 / s, (steps - a) as f64 / s])),
        3 => {
            for a in 0..=steps {
                for b in 0..=steps - a {
                    visit(vec![a as f64 / s, b as f64 / s, (steps - a - b) as f64 / s]);
                }
            }
        }
        _ => panic!("grid search is limited to m <= 3"),
    }
    best
}

/// The certificate over the feasible set: for the inscribed layout the
/// minimum is taken over the Euclidean ball of radius `d^(-(1/p - 1/2))`.
pub fn feasible_certificate(family: &VectorFamily) -> Result<Certificate, AuditError> {
    if family.kind() != FamilyKind::Inscribed {
        return dual_certificate(family);
    }
    let rho = (family.dim() as f64).powf(-(family.p().recip() - 0.5));
    let mut c = simplex_certificate(family, Exponent::two(), CERTIFICATE_TOL, CERTIFICATE_CAP)?;
    c.value *= rho;
    c.lower_bound *= rho;
    c.gap *= rho;
    Ok(c)
}

/// Upper bound on the optimal value of the hard function from a certificate.
pub fn fstar_upper_bound(cert: f64, mu: f64, eta: f64, delta_bar: f64) -> f64 {
    -cert / (2.0 * mu) + (eta - delta_bar / 2.0) / mu
}
