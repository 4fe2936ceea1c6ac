//! Local smoothing by infimal convolution,
//! `Sf(x) = min_{||h||_p <= eta} f(x + h) + 2 ||h||_r^2` with `r = min(p, 3 ln d)`,
//! for `f` a maximum of affine pieces and an optional norm guard.
//!
//! The minimum is computed through its concave dual over the simplex of
//! pieces. For weights `lambda` with `G = sum_j lambda_j a_j`,
//! `D(lambda) = sum_j lambda_j l_j(x) + min_h <G, h> + 2 ||h||_r^2`
//! is a lower bound on `Sf(x)`, and `f(x + h*) + 2 ||h*||_r^2` is an upper
//! bound, so every answer carries a certified gap. The norm guard enters
//! through supporting planes at the current `x + h*`. By Danskin's theorem the
//! gradient is `G` at the optimal weights.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::SmoothingError;
use crate::geometry::{dot, lp_norm, norming_functional, project_simplex, Exponent, LpSpace};
use crate::instance::Branch;

pub const DEFAULT_INNER_TOL: f64 = 1e-9;
pub const DEFAULT_INNER_CAP: usize = 10_000;

/// Target for the final polish; answers stop refining once the certified gap
/// is this small relative to the value.
const POLISH_TOL: f64 = 1e-14;
/// Ascent iterations between active-set refinements.
const ASCENT_CHUNK: usize = 200;
/// L-BFGS steps on the weights and guard functional per round.
const GUARD_STEPS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub p: Exponent,
    pub ln_d: f64,
    pub kappa: f64,
    pub eta: f64,
    /// Exponent of the regularizer `2 ||h||_r^2`.
    pub reg_exponent: f64,
    pub mu: f64,
    pub inner_tol: f64,
    pub inner_cap: usize,
}

impl SmoothingConfig {
    /// Constants for a space whose dimension has logarithm `ln_d`.
    pub fn from_log_dim(p: Exponent, ln_d: f64, kappa: f64, eta: f64) -> Result<Self, SmoothingError> {
        if p.value() < 2.0 {
            return Err(SmoothingError::UnsupportedExponent(p.value()));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(SmoothingError::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(SmoothingError::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        let reg_exponent = p.min_with(3.0 * ln_d);
        if reg_exponent < 2.0 {
            return Err(SmoothingError::DimensionTooSmall(3.0 * ln_d));
        }
        let mu = 2f64.powf(1.0 - kappa) * (p.min_with(ln_d) / eta).powf(kappa);
        Ok(Self {
            p,
            ln_d,
            kappa,
            eta,
            reg_exponent,
            mu,
            inner_tol: DEFAULT_INNER_TOL,
            inner_cap: DEFAULT_INNER_CAP,
        })
    }

    pub fn with_tolerance(mut self, inner_tol: f64, inner_cap: usize) -> Result<Self, SmoothingError> {
        if !(inner_tol > 0.0) || inner_cap == 0 {
            return Err(SmoothingError::InvalidParameter(format!(
                "need inner_tol > 0 and inner_cap >= 1, got {inner_tol} and {inner_cap}"
            )));
        }
        self.inner_tol = inner_tol;
        self.inner_cap = inner_cap;
        Ok(self)
    }
}

/// `SmoothingConfig::from_log_dim(p, ln d, kappa, eta)`.
pub fn smoothing_constants(p: Exponent, d: usize, kappa: f64, eta: f64) -> Result<SmoothingConfig, SmoothingError> {
    SmoothingConfig::from_log_dim(p, (d as f64).ln(), kappa, eta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    pub offset: f64,
}

/// `f(y) = max{ max_j <a_j, y> + b_j, ||y||_p - c }`, the guard term optional.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxForm {
    space: LpSpace,
    pieces: Vec<AffinePiece>,
    dual_norms: Vec<f64>,
    guard: Option<f64>,
}

impl MaxForm {
    pub fn new(space: LpSpace, pieces: Vec<AffinePiece>, guard: Option<f64>) -> Self {
        assert!(!pieces.is_empty() || guard.is_some(), "a max form needs at least one term");
        for piece in &pieces {
            assert_eq!(piece.slope.len(), space.dim, "piece slope has the wrong dimension");
        }
        let q = space.p.dual();
        let dual_norms = pieces.iter().map(|a| lp_norm(&a.slope, q)).collect();
        Self { space, pieces, dual_norms, guard }
    }

    /// The affine function `<slope, y> + offset`.
    pub fn affine(space: LpSpace, slope: Vec<f64>, offset: f64) -> Self {
        Self::new(space, vec![AffinePiece { slope, offset }], None)
    }

    pub fn space(&self) -> LpSpace {
        self.space
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn guard(&self) -> Option<f64> {
        self.guard
    }

    pub fn value(&self, y: &[f64]) -> Result<f64, SmoothingError> {
        self.space.check(y)?;
        let mut v = f64::NEG_INFINITY;
        for a in &self.pieces {
            v = v.max(dot(&a.slope, y) + a.offset);
        }
        if let Some(c) = self.guard {
            v = v.max(lp_norm(y, self.space.p) - c);
        }
        Ok(v)
    }
}

/// A smoothed value with its gradient and solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothAnswer {
    /// Certified upper bound on `Sf(x)`, within `gap` of the true value.
    pub value: f64,
    pub gradient: Vec<f64>,
    /// The inner minimizer `h*`.
    pub shift: Vec<f64>,
    /// Pieces carrying weight at the optimum.
    pub support: Vec<Branch>,
    pub gap: f64,
    pub iterations: usize,
    /// Smallest distance from `f(x + h*)` to a piece outside the support.
    pub tie_margin: f64,
    /// `| ||h_free||_p / eta - 1 |` for the unconstrained minimizer `h_free`;
    /// near zero the ball constraint is about to switch on or off.
    pub constraint_margin: f64,
    pub near_tie: bool,
}

/// Minimizer of `<g, h> + 2 ||h||_r^2` over `||h||_p <= eta`.
#[derive(Clone)]
struct Inner {
    h: Vec<f64>,
    value: f64,
    free_ratio: f64,
}

fn inner_min(g: &[f64], p: Exponent, r: f64, eta: f64) -> Inner {
    let d = g.len();
    match p {
        Exponent::Finite(pv) if pv == r => {
            let q = p.dual();
            let s = lp_norm(g, q);
            if s == 0.0 {
                return Inner { h: vec![0.0; d], value: 0.0, free_ratio: 0.0 };
            }
            let t = (s / 4.0).min(eta);
            let mut h = norming_functional(g, q);
            h.iter_mut().for_each(|v| *v *= -t);
            Inner { h, value: -t * s + 2.0 * t * t, free_ratio: s / (4.0 * eta) }
        }
        _ => {
            let m = lower_reg_magnitudes(g, p, r, eta);
            let h: Vec<f64> = g.iter().zip(&m.0).map(|(gj, mj)| -gj.signum() * mj).collect();
            let n = lp_norm(&h, Exponent::Finite(r));
            let value = dot(g, &h) + 2.0 * n * n;
            Inner { h, value, free_ratio: m.1 }
        }
    }
}

/// Magnitudes for the case `r < p`, where the ball and the regularizer use
/// different norms. Returns the magnitudes and the ratio of the free
/// minimizer's `p`-norm to `eta`.
fn lower_reg_magnitudes(g: &[f64], p: Exponent, r: f64, eta: f64) -> (Vec<f64>, f64) {
    let d = g.len();
    let abs: Vec<f64> = g.iter().map(|v| v.abs()).collect();
    let rs = Exponent::Finite(r).dual();
    let s = lp_norm(&abs, rs);
    if s == 0.0 {
        return (vec![0.0; d], 0.0);
    }
    let mut free = norming_functional(&abs, rs);
    free.iter_mut().for_each(|v| *v *= s / 4.0);
    let ratio = lp_norm(&free, p) / eta;
    if ratio <= 1.0 {
        return (free, ratio);
    }
    let n_free = s / 4.0;
    let m = match p {
        Exponent::Infinity => {
            // m_j(N) = min(eta, (|g_j| N^(r-2) / 4)^(1/(r-1))) with N = ||m(N)||_r.
            let at = |ln_n: f64| -> Vec<f64> {
                abs.iter()
                    .map(|&a| {
                        if a == 0.0 {
                            0.0
                        } else {
                            ((a.ln() + (r - 2.0) * ln_n - 4f64.ln()) / (r - 1.0)).exp().min(eta)
                        }
                    })
                    .collect()
            };
            let excess = |ln_n: f64| lp_norm(&at(ln_n), Exponent::Finite(r)).ln() - ln_n;
            let ln_n = bisect_decreasing(excess, n_free.ln());
            at(ln_n)
        }
        Exponent::Finite(pv) => {
            // |g_j| = 4 N^(2-r) m_j^(r-1) + nu p m_j^(p-1), N = ||m||_r, ||m||_p = eta.
            let solve = |nu: f64| -> Vec<f64> {
                let at = |ln_n: f64| -> Vec<f64> {
                    let a = 4.0 * (-(r - 2.0) * ln_n).exp();
                    abs.iter().map(|&c| two_power_root(a, r - 1.0, nu * pv, pv - 1.0, c)).collect()
                };
                let excess = |ln_n: f64| lp_norm(&at(ln_n), Exponent::Finite(r)).ln() - ln_n;
                at(bisect_decreasing(excess, n_free.ln()))
            };
            let over = |ln_nu: f64| (lp_norm(&solve(ln_nu.exp()), p) / eta).ln();
            let (mut lo, mut hi) = (-60.0_f64, 0.0_f64);
            while over(hi) > 0.0 && hi < 200.0 {
                hi += 10.0;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if over(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            solve(hi.exp())
        }
    };
    (m, ratio)
}

/// Root of a decreasing function of `ln N` whose root is at most `start`.
fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, start: f64) -> f64 {
    let mut hi = start;
    let mut lo = start - 1.0;
    while f(lo) < 0.0 && lo > start - 200.0 {
        lo -= 2.0 * (hi - lo);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Positive root of `a m^e1 + b m^e2 = c` (all positive, `e1, e2 >= 1`) by
/// Newton's method from an upper bound; the function is convex and increasing.
fn two_power_root(a: f64, e1: f64, b: f64, e2: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let mut m = (c / a).powf(1.0 / e1);
    if b > 0.0 {
        m = m.min((c / b).powf(1.0 / e2));
    }
    for _ in 0..100 {
        let f = a * m.powf(e1) + b * m.powf(e2) - c;
        let df = a * e1 * m.powf(e1 - 1.0) + b * e2 * m.powf(e2 - 1.0);
        if df <= 0.0 {
            break;
        }
        let next = (m - f / df).max(0.0);
        if (next - m).abs() <= 1e-16 * m {
            return next;
        }
        m = next;
    }
    m
}

struct Term {
    slope: Vec<f64>,
    at_x: f64,
    label: Branch,
}

#[derive(Clone)]
struct State {
    weights: Vec<f64>,
    value: f64,
    /// `l_j(x + h)` for every term.
    grad: Vec<f64>,
    inner: Inner,
}

struct Dual<'a> {
    x: &'a [f64],
    terms: Vec<Term>,
    p: Exponent,
    r: f64,
    eta: f64,
}

impl Dual<'_> {
    fn combine(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.x.len()];
        for (t, &l) in self.terms.iter().zip(w) {
            if l != 0.0 {
                g.iter_mut().zip(&t.slope).for_each(|(gi, ai)| *gi += l * ai);
            }
        }
        g
    }

    fn eval(&self, weights: Vec<f64>) -> State {
        let g = self.combine(&weights);
        let inner = inner_min(&g, self.p, self.r, self.eta);
        let grad: Vec<f64> = self.terms.iter().map(|t| t.at_x + dot(&t.slope, &inner.h)).collect();
        let base: f64 = self.terms.iter().zip(&weights).map(|(t, l)| t.at_x * l).sum();
        State { value: base + inner.value, grad, inner, weights }
    }

    fn fw_gap(st: &State) -> f64 {
        let best = st.grad.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let avg: f64 = st.grad.iter().zip(&st.weights).map(|(g, l)| g * l).sum();
        (best - avg).max(0.0)
    }

    /// Projected gradient ascent with Barzilai-Borwein steps and backtracking.
    fn ascend(&self, mut st: State, tol: f64, cap: usize, iters: &mut usize) -> State {
        let mut step = 1.0;
        while *iters < cap && Self::fw_gap(&st) > tol {
            *iters += 1;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = st.weights.iter().zip(&st.grad).map(|(l, g)| l + step * g).collect();
                let cand = project_simplex(&trial);
                let diff: Vec<f64> = cand.iter().zip(&st.weights).map(|(a, b)| a - b).collect();
                let dd = dot(&diff, &diff);
                if dd == 0.0 {
                    break;
                }
                let next = self.eval(cand);
                let model = st.value + dot(&st.grad, &diff) - dd / (2.0 * step);
                if next.value >= model - 1e-15 * st.value.abs().max(1.0) {
                    accepted = Some((next, diff, dd));
                    break;
                }
                step *= 0.5;
            }
            let Some((next, diff, dd)) = accepted else { break };
            let yd: f64 = next.grad.iter().zip(&st.grad).zip(&diff).map(|((a, b), s)| (a - b) * s).sum();
            step = if yd < 0.0 { (dd / -yd).clamp(1e-8, 1e8) } else { (2.0 * step).min(1e8) };
            st = next;
        }
        st
    }

    /// Newton's method on the equalities `l_j(x + h) = l_k(x + h)` over
    /// `support`, with a finite-difference Jacobian. Weights may leave the
    /// simplex; the caller decides what to do with negative ones.
    fn newton_on(&self, support: &[usize], start: Vec<f64>) -> State {
        let k = support.len();
        let mut cur = self.eval(start);
        if k < 2 {
            return cur;
        }
        // The largest weight absorbs the simplex constraint.
        let last = *support.iter().max_by(|&&a, &&b| cur.weights[a].total_cmp(&cur.weights[b])).expect("nonempty");
        let free: Vec<usize> = support.iter().copied().filter(|&j| j != last).collect();
        let residual = |s: &State| -> Vec<f64> { free.iter().map(|&j| s.grad[j] - s.grad[last]).collect() };
        let norm = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let mut res = residual(&cur);
        for _ in 0..60 {
            if norm(&res) <= 1e-15 * (1.0 + cur.value.abs()) {
                break;
            }
            // Steps proportional to the weight: near zero the residual can
            // behave like a fractional power of the weight.
            let mut jac = vec![vec![0.0; k - 1]; k - 1];
            for (col, &j) in free.iter().enumerate() {
                let fd = (1e-7 * cur.weights[j].abs()).max(1e-15);
                let mut w = cur.weights.clone();
                w[j] += fd;
                w[last] -= fd;
                let r = residual(&self.eval(w));
                for row in 0..k - 1 {
                    jac[row][col] = (r[row] - res[row]) / fd;
                }
            }
            let Some(delta) = solve_linear(jac, res.iter().map(|v| -v).collect()) else { break };
            let mut scale = 1.0;
            let mut improved = None;
            for _ in 0..40 {
                let mut w = cur.weights.clone();
                for (col, &j) in free.iter().enumerate() {
                    w[j] += scale * delta[col];
                    w[last] -= scale * delta[col];
                }
                let next = self.eval(w);
                let r = residual(&next);
                if norm(&r) < norm(&res) {
                    improved = Some((next, r));
                    break;
                }
                scale *= 0.5;
            }
            let Some((next, r)) = improved else { break };
            cur = next;
            res = r;
        }
        cur
    }

    fn set_guard(&mut self, at: usize, w: Vec<f64>, c: f64) {
        self.terms[at] = Term { at_x: dot(&w, self.x) - c, slope: w, label: Branch::Guard };
    }

    /// Dual value with the guard plane at `N(u)`, and its gradient in `u`:
    /// `s J_N(u)^T (x + h*)` with `J_N` the (symmetric) Jacobian of the
    /// norming map. Finite `p` only.
    fn guard_probe(&mut self, at: usize, c: f64, weights: &[f64], u: &[f64]) -> (State, Vec<f64>, Vec<f64>) {
        let pv = self.p.value();
        self.set_guard(at, norming_functional(u, self.p), c);
        let st = self.eval(weights.to_vec());
        let y: Vec<f64> = self.x.iter().zip(&st.inner.h).map(|(a, b)| a + b).collect();
        let nu = lp_norm(u, self.p);
        let w = &self.terms[at].slope;
        let wy = dot(w, &y);
        let scale = weights[at] * (pv - 1.0) / nu.powf(pv - 1.0);
        let grad = u
            .iter()
            .zip(&y)
            .map(|(ui, yi)| {
                let a = ui.abs();
                let phi = a.powf(pv - 1.0).copysign(*ui);
                scale * (a.powf(pv - 2.0) * yi - phi * wy / nu)
            })
            .collect();
        (st, grad, y)
    }

    /// Dual value and gradient in `z = (free weights, u)`: the weights on the
    /// support other than `last` are free and `last` takes up the rest of
    /// the unit mass. `None` when that leaves the simplex.
    fn joint_probe(&mut self, at: usize, c: f64, free: &[usize], last: usize, z: &[f64]) -> Option<(State, Vec<f64>, Vec<f64>)> {
        let k = free.len();
        let mut weights = vec![0.0; self.terms.len()];
        free.iter().zip(z).for_each(|(&j, &v)| weights[j] = v);
        weights[last] = 1.0 - z[..k].iter().sum::<f64>();
        if weights.iter().any(|&v| v < 0.0) {
            return None;
        }
        let (st, gu, y) = self.guard_probe(at, c, &weights, &z[k..]);
        let mut g: Vec<f64> = free.iter().map(|&j| st.grad[j] - st.grad[last]).collect();
        g.extend(gu);
        Some((st, g, y))
    }

    /// L-BFGS ascent of the dual jointly over the support weights and the
    /// guard functional `w = N(u)`; the weights stay on the face of the
    /// simplex spanned by the current support.
    fn refine_guard(&mut self, at: usize, c: f64, st: State, u: Vec<f64>, steps: usize, iters: &mut usize) -> (State, Vec<f64>) {
        const MEMORY: usize = 8;
        let (cur0, _, y0) = self.guard_probe(at, c, &st.weights, &u);
        let raw_gap = lp_norm(&y0, self.p) - dot(&self.terms[at].slope, &y0);
        let tol = 0.1 * POLISH_TOL * (1.0 + cur0.value.abs());
        if st.weights[at] * raw_gap <= tol && raw_gap > tol {
            // Little or no weight leaves `u` with no useful gradient; take the
            // plane supporting the guard at the current point so the weights
            // can pick it up.
            *iters += 1;
            self.set_guard(at, norming_functional(&y0, self.p), c);
            return (self.eval(st.weights), y0);
        }
        let support: Vec<usize> = (0..self.terms.len()).filter(|&j| st.weights[j] > 0.0).collect();
        let last = *support.iter().max_by(|&&a, &&b| st.weights[a].total_cmp(&st.weights[b])).expect("weights sum to one");
        let free: Vec<usize> = support.iter().copied().filter(|&j| j != last).collect();
        let k = free.len();
        let mut z: Vec<f64> = free.iter().map(|&j| st.weights[j]).collect();
        z.extend_from_slice(&u);
        let Some((mut cur, mut g, mut y)) = self.joint_probe(at, c, &free, last, &z) else {
            return (cur0, u);
        };
        let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        for _ in 0..steps {
            let plane_gap = cur.weights[at] * (lp_norm(&y, self.p) - dot(&self.terms[at].slope, &y));
            let fw = Self::fw_gap(&cur);
            if plane_gap <= tol && fw <= tol {
                break;
            }
            *iters += 1;
            // Two-loop recursion for an ascent direction.
            let mut q = g.clone();
            let mut alphas = Vec::with_capacity(pairs.len());
            for (sv, yv, rho) in pairs.iter().rev() {
                let a = rho * dot(sv, &q);
                q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
                alphas.push(a);
            }
            if let Some((sv, yv, _)) = pairs.back() {
                let h0 = dot(sv, yv) / dot(yv, yv);
                q.iter_mut().for_each(|v| *v *= h0);
            }
            for ((sv, yv, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(yv, &q);
                q.iter_mut().zip(sv).for_each(|(qi, si)| *qi += (a - b) * si);
            }
            let mut dir = q;
            let mut slope = dot(&g, &dir);
            if pairs.is_empty() || !(slope > 0.0) {
                // `N` is scale invariant, so the `u` part of `g` is
                // orthogonal to `u` and the step toward the rescaled `y` (the
                // fixed point of `w = N(y)`) ascends whenever `<g, y> > 0`.
                // The weights start with a plain gradient step.
                pairs.clear();
                let uz = &z[k..];
                let ratio = lp_norm(uz, self.p) / lp_norm(&y, self.p);
                dir = g[..k].to_vec();
                dir.extend(y.iter().zip(uz).map(|(yi, ui)| yi * ratio - ui));
                slope = dot(&g, &dir);
                if !(slope > 0.0) {
                    break;
                }
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial_z: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                if let Some((trial, tg, ty)) = self.joint_probe(at, c, &free, last, &trial_z) {
                    if trial.value >= cur.value + 1e-4 * t * slope {
                        accepted = Some((trial, tg, ty, trial_z));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((trial, tg, ty, trial_z)) = accepted else { break };
            let sv: Vec<f64> = trial_z.iter().zip(&z).map(|(a, b)| a - b).collect();
            // Curvature pairs for the minimization of `-D`.
            let yv: Vec<f64> = g.iter().zip(&tg).map(|(a, b)| a - b).collect();
            let sy = dot(&sv, &yv);
            if sy > 1e-300 {
                if pairs.len() == MEMORY {
                    pairs.pop_front();
                }
                pairs.push_back((sv, yv, 1.0 / sy));
            }
            cur = trial;
            g = tg;
            y = ty;
            z = trial_z;
        }
        let u = z.split_off(k);
        self.set_guard(at, norming_functional(&u, self.p), c);
        (cur, u)
    }

    /// Active-set refinement: Newton on the support, dropping weights that
    /// turn negative and adding terms that rise above the common value.
    /// Returns the better of `st` and the refined state by Frank-Wolfe gap.
    fn polish(&self, st: State) -> State {
        let n = st.weights.len();
        let mut support: Vec<usize> = (0..n).filter(|&j| st.weights[j] > 0.0).collect();
        if support.is_empty() {
            support.push((0..n).max_by(|&a, &b| st.weights[a].total_cmp(&st.weights[b])).unwrap_or(0));
        }
        let mut weights = st.weights.clone();
        let mut best = st;
        for _ in 0..2 * n + 2 {
            let mut w = vec![0.0; n];
            let mass: f64 = support.iter().map(|&j| weights[j].max(0.0)).sum();
            for &j in &support {
                w[j] = if mass > 0.0 { weights[j].max(1e-12) / mass } else { 1.0 / support.len() as f64 };
            }
            let cand = self.newton_on(&support, w);
            let scale = 1.0 + cand.value.abs();
            if let Some(&j) = support
                .iter()
                .filter(|&&j| cand.weights[j] < -1e-12)
                .min_by(|&&a, &&b| cand.weights[a].total_cmp(&cand.weights[b]))
            {
                support.retain(|&i| i != j);
                weights = cand.weights;
                continue;
            }
            let common = support.iter().map(|&j| cand.grad[j]).fold(f64::NEG_INFINITY, f64::max);
            let outside = (0..n)
                .filter(|j| !support.contains(j))
                .max_by(|&a, &b| cand.grad[a].total_cmp(&cand.grad[b]));
            let clean: Vec<f64> = cand.weights.iter().map(|v| v.max(0.0)).collect();
            let total: f64 = clean.iter().sum();
            let cand = self.eval(clean.iter().map(|v| v / total).collect());
            if Self::fw_gap(&cand) < Self::fw_gap(&best) {
                best = cand;
            }
            match outside {
                Some(j) if best.grad[j] > common + 1e-13 * scale => {
                    support.push(j);
                    weights = best.weights.clone();
                }
                _ => break,
            }
        }
        best
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Smoothed value and gradient of `form` at `x`.
pub fn smooth(form: &MaxForm, x: &[f64], cfg: &SmoothingConfig) -> Result<SmoothAnswer, SmoothingError> {
    let space = form.space;
    space.check(x)?;
    if cfg.p != space.p {
        return Err(SmoothingError::InvalidParameter(format!(
            "configuration is for p = {}, the form lives in l_{}",
            cfg.p, space.p
        )));
    }
    let p = space.p;
    let eta = cfg.eta;
    let nx = lp_norm(x, p);
    let at_x: Vec<f64> = form.pieces.iter().map(|a| dot(&a.slope, x) + a.offset).collect();

    // Anything that cannot reach the max anywhere on x + eta * ball is dropped.
    let mut floor = f64::NEG_INFINITY;
    for (v, n) in at_x.iter().zip(&form.dual_norms) {
        floor = floor.max(v - eta * n);
    }
    if let Some(c) = form.guard {
        floor = floor.max(nx - eta - c);
    }
    let mut terms: Vec<Term> = Vec::new();
    for (j, a) in form.pieces.iter().enumerate() {
        if at_x[j] + eta * form.dual_norms[j] >= floor {
            terms.push(Term { slope: a.slope.clone(), at_x: at_x[j], label: Branch::Affine(j + 1) });
        }
    }
    let kept = terms.len();
    let guard = form.guard.filter(|c| nx + eta - c >= floor);
    let plane_with = |w: &[f64], c: f64| -> Term { Term { at_x: dot(w, x) - c, slope: w.to_vec(), label: Branch::Guard } };
    if let Some(c) = guard {
        terms.push(plane_with(&norming_functional(x, p), c));
    }

    let mut dual = Dual { x, terms, p, r: cfg.reg_exponent, eta };
    let true_f = |st: &State| -> f64 {
        let mut v = st.grad[..kept].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if let Some(c) = guard {
            let y: Vec<f64> = x.iter().zip(&st.inner.h).map(|(a, b)| a + b).collect();
            v = v.max(lp_norm(&y, p) - c);
        }
        v
    };
    let start = {
        let best = (0..dual.terms.len())
            .max_by(|&a, &b| dual.terms[a].at_x.total_cmp(&dual.terms[b].at_x))
            .expect("at least one term survives");
        let mut w = vec![0.0; dual.terms.len()];
        w[best] = 1.0;
        w
    };
    let mut st = dual.eval(start);
    let mut iters = 0;
    let mut stale = 0;
    let mut flat = 0;
    let mut best: Option<(f64, State, Option<Vec<f64>>)> = None;
    let mut anchor = x.to_vec();
    let guard_slope = |dual: &Dual| guard.map(|_| dual.terms[kept].slope.clone());
    loop {
        let chunk = (iters + ASCENT_CHUNK).min(cfg.inner_cap);
        st = dual.ascend(st, cfg.inner_tol * 1e-3, chunk, &mut iters);
        st = dual.polish(st);
        let avg: f64 = st.grad.iter().zip(&st.weights).map(|(g, l)| g * l).sum();
        let gap = (true_f(&st) - avg).max(0.0);
        let improved = best.as_ref().is_none_or(|b| gap < 0.9 * b.0);
        let moved = best.as_ref().is_none_or(|b| gap < b.0);
        if moved {
            best = Some((gap, st.clone(), guard_slope(&dual)));
        }
        stale = if improved { 0 } else { stale + 1 };
        flat = if moved { 0 } else { flat + 1 };
        // Slow progress is tolerated until the gap meets `inner_tol`; rounds
        // without any progress end the search regardless.
        let settled = stale >= 3 && (guard.is_none() || gap <= 0.1 * cfg.inner_tol) || stale >= 12 && gap <= cfg.inner_tol;
        if gap <= POLISH_TOL * (1.0 + st.value.abs()) || iters >= cfg.inner_cap || settled || flat >= 12 {
            break;
        }
        // The guard enters through one supporting plane `<w, y> - c`, and the
        // dual is also maximized over `w`. For `1 < p < inf`, `w = N(u)` and
        // L-BFGS runs jointly in the weights and `u`. Otherwise the norming
        // map is not smooth, and `w` takes a Frank-Wolfe step toward the
        // norming functional of `y = x + h*` instead.
        if let Some(c) = guard {
            if matches!(p, Exponent::Finite(v) if v > 1.0) {
                let (next, u) = dual.refine_guard(kept, c, st, anchor.clone(), GUARD_STEPS, &mut iters);
                st = next;
                anchor = u;
                continue;
            }
            let y: Vec<f64> = x.iter().zip(&st.inner.h).map(|(a, b)| a + b).collect();
            let w0 = dual.terms[kept].slope.clone();
            let dw: Vec<f64> = norming_functional(&y, p).iter().zip(&w0).map(|(a, b)| a - b).collect();
            let slope0 = st.weights[kept] * dot(&y, &dw);
            if slope0 <= 1e-300 {
                dual.set_guard(kept, norming_functional(&y, p), c);
                st = dual.eval(st.weights.clone());
                continue;
            }
            let mut beta: f64 = 1.0;
            for _ in 0..40 {
                let w: Vec<f64> = w0.iter().zip(&dw).map(|(a, b)| a + beta * b).collect();
                dual.set_guard(kept, w, c);
                let trial = dual.eval(st.weights.clone());
                if trial.value >= st.value + 0.5 * beta * slope0 {
                    st = trial;
                    break;
                }
                // Maximizer of the concave quadratic through both values.
                let a = (st.value + slope0 * beta - trial.value) / (beta * beta);
                beta = if a > 0.0 { (slope0 / (2.0 * a)).clamp(0.1 * beta, 0.5 * beta) } else { 0.5 * beta };
                if beta < 1e-12 {
                    dual.set_guard(kept, w0.clone(), c);
                    break;
                }
            }
        }
    }
    let (best_gap, best_state, best_slope) = best.expect("the loop runs at least once");
    st = best_state;
    if let (Some(c), Some(w)) = (guard, best_slope) {
        dual.set_guard(kept, w, c);
    }
    let gap = best_gap;
    let upper = true_f(&st);
    let reg = {
        let n = lp_norm(&st.inner.h, Exponent::Finite(cfg.reg_exponent));
        2.0 * n * n
    };
    let f_x = form.value(x)?;
    let value = (upper + reg).min(f_x);
    if gap > cfg.inner_tol {
        return Err(SmoothingError::NotConverged { iterations: iters, best_value: value, gap });
    }

    let mut support = Vec::new();
    let mut tie_margin = f64::INFINITY;
    for (j, t) in dual.terms.iter().enumerate() {
        if st.weights[j] > 1e-13 {
            if !support.contains(&t.label) {
                support.push(t.label);
            }
        } else if t.label != Branch::Guard {
            tie_margin = tie_margin.min(upper - st.grad[j]);
        }
    }
    if guard.is_some() && !support.contains(&Branch::Guard) {
        let y: Vec<f64> = x.iter().zip(&st.inner.h).map(|(a, b)| a + b).collect();
        tie_margin = tie_margin.min(upper - (lp_norm(&y, p) - guard.unwrap_or(0.0)));
    }
    support.sort_by_key(|b| match b {
        Branch::Affine(i) => *i,
        Branch::Guard => usize::MAX,
    });
    let gradient = dual.combine(&st.weights);
    Ok(SmoothAnswer {
        value,
        gradient,
        shift: st.inner.h.clone(),
        support,
        gap,
        iterations: iters,
        tie_margin,
        constraint_margin: (st.inner.free_ratio - 1.0).abs(),
        near_tie: tie_margin < 10.0 * cfg.inner_tol,
    })
}

pub fn smooth_value(form: &MaxForm, x: &[f64], cfg: &SmoothingConfig) -> Result<f64, SmoothingError> {
    Ok(smooth(form, x, cfg)?.value)
}

pub fn smooth_gradient(form: &MaxForm, x: &[f64], cfg: &SmoothingConfig) -> Result<Vec<f64>, SmoothingError> {
    Ok(smooth(form, x, cfg)?.gradient)
}
