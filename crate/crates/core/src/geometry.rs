//! Norms, dual norms, and Euclidean projections for `l_p` balls and the
//! probability simplex.
//!
//! Every routine here is a pure function of its inputs. Vectors are plain
//! `f64` slices; dimension checks happen at the [`LpSpace`] boundary.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Tolerance used by the general-`p` ball projection.
pub const PROJECTION_TOL: f64 = 1e-8;
/// Iteration cap for the multiplier root-find of the general-`p` projection.
pub const PROJECTION_MAX_ITER: usize = 200;

/// An `l_p` exponent. Infinity is its own variant so that `1 <-> inf` is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self, GeometryError> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(GeometryError::InvalidExponent(p))
        }
    }

    pub fn one() -> Self {
        Exponent::Finite(1.0)
    }

    pub fn two() -> Self {
        Exponent::Finite(2.0)
    }

    /// `p / (p - 1)`, mapping `1 <-> inf` and fixing `2`.
    pub fn dual(self) -> Self {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) if p == 2.0 => Exponent::Finite(2.0),
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    /// The exponent as a float, with `f64::INFINITY` for the infinite case.
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// `1/p`, exactly zero for `p = inf`.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// Closed-form `min(p, t)` used by the smoothing and bound formulas.
    pub fn min_with(self, t: f64) -> f64 {
        match self {
            Exponent::Finite(p) => p.min(t),
            Exponent::Infinity => t,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

// Serialized as a number, or the string "inf".
impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => p,
            Raw::Str(s) if s == "inf" || s == "infinity" => f64::INFINITY,
            Raw::Str(s) => {
                return Err(serde::de::Error::custom(format!(
                    "expected a number >= 1 or \"inf\", got {s:?}"
                )))
            }
        };
        Exponent::new(p).map_err(serde::de::Error::custom)
    }
}

/// `p / (p - 1)`.
pub fn dual_exponent(p: Exponent) -> Exponent {
    p.dual()
}

/// The space `(R^d, ||.||_p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpSpace {
    pub dim: usize,
    pub p: Exponent,
}

impl LpSpace {
    pub fn new(dim: usize, p: Exponent) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        Ok(Self { dim, p })
    }

    pub fn dual_exponent(&self) -> Exponent {
        self.p.dual()
    }

    pub fn check(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64, GeometryError> {
        self.check(x)?;
        Ok(lp_norm(x, self.p))
    }

    pub fn dual_norm(&self, x: &[f64]) -> Result<f64, GeometryError> {
        self.check(x)?;
        Ok(lp_norm(x, self.p.dual()))
    }
}

/// `||x||_p`, overflow-safe for large `p` by factoring out the max entry.
pub fn lp_norm(x: &[f64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => max_abs(x),
        Exponent::Finite(p) if p == 1.0 => x.iter().map(|v| v.abs()).sum(),
        Exponent::Finite(p) if p == 2.0 => {
            let s = lanes(x, |v| v * v);
            if s.is_finite() && s >= f64::MIN_POSITIVE / f64::EPSILON {
                return s.sqrt();
            }
            // Overflow or loss of precision in the squares: rescale.
            let m = max_abs(x);
            if m == 0.0 || !m.is_finite() {
                return m;
            }
            let inv = 1.0 / m;
            m * lanes(x, |v| (v * inv) * (v * inv)).sqrt()
        }
        Exponent::Finite(p) => {
            let m = max_abs(x);
            if m == 0.0 || !m.is_finite() {
                return m;
            }
            let s: f64 = x.iter().map(|v| (v.abs() / m).powf(p)).sum();
            m * s.powf(1.0 / p)
        }
    }
}

fn max_abs(x: &[f64]) -> f64 {
    let mut acc = [0.0_f64; 8];
    let chunks = x.chunks_exact(8);
    let tail = chunks.remainder();
    for c in chunks {
        for (a, v) in acc.iter_mut().zip(c) {
            *a = a.max(v.abs());
        }
    }
    tail.iter().chain(&acc).fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `sum f(x_i)` with eight independent accumulators, so the loop vectorizes.
/// The summation order is fixed, so results are reproducible.
fn lanes(x: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut acc = [0.0_f64; 8];
    let chunks = x.chunks_exact(8);
    let tail = chunks.remainder();
    for c in chunks {
        for (a, &v) in acc.iter_mut().zip(c) {
            *a += f(v);
        }
    }
    acc.iter().sum::<f64>() + tail.iter().map(|&v| f(v)).sum::<f64>()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0_f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// The norming functional of `x` in `l_p`: a vector `u` with
/// `||u||_{p*} = 1` and `<u, x> = ||x||_p`. This is a subgradient of `||.||_p`
/// at `x`; at `x = 0` the zero vector is returned (also a subgradient).
/// Ties for `p = inf` go to the lowest index.
pub fn norming_functional(x: &[f64], p: Exponent) -> Vec<f64> {
    let n = lp_norm(x, p);
    let mut u = vec![0.0; x.len()];
    if n == 0.0 {
        return u;
    }
    match p {
        Exponent::Infinity => {
            let (idx, _) = x
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
            u[idx] = x[idx].signum();
        }
        Exponent::Finite(p) if p == 1.0 => {
            for (ui, xi) in u.iter_mut().zip(x) {
                if *xi != 0.0 {
                    *ui = xi.signum();
                }
            }
        }
        Exponent::Finite(p) => {
            for (ui, xi) in u.iter_mut().zip(x) {
                if *xi != 0.0 {
                    *ui = xi.signum() * (xi.abs() / n).powf(p - 1.0);
                }
            }
        }
    }
    u
}

/// Euclidean projection onto `{y : ||y||_p <= radius}`.
///
/// Exact for `p` in `{1, 2, inf}`; for other `p` the KKT multiplier is found
/// by a monotone 1-D search and the result is within [`PROJECTION_TOL`] of the
/// true projection.
pub fn project_lp_ball(x: &[f64], p: Exponent, radius: f64) -> Result<Vec<f64>, GeometryError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeometryError::InvalidRadius(radius));
    }
    match p {
        Exponent::Infinity => Ok(x.iter().map(|v| v.clamp(-radius, radius)).collect()),
        Exponent::Finite(q) if q == 2.0 => {
            let n = lp_norm(x, p);
            if n <= radius {
                Ok(x.to_vec())
            } else {
                let s = radius / n;
                Ok(x.iter().map(|v| v * s).collect())
            }
        }
        Exponent::Finite(q) if q == 1.0 => Ok(project_l1_ball(x, radius)),
        Exponent::Finite(q) => project_general(x, q, radius),
    }
}

fn project_l1_ball(x: &[f64], radius: f64) -> Vec<f64> {
    let n1: f64 = x.iter().map(|v| v.abs()).sum();
    if n1 <= radius {
        return x.to_vec();
    }
    let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let theta = simplex_threshold(&abs, radius);
    x.iter()
        .map(|v| v.signum() * (v.abs() - theta).max(0.0))
        .collect()
}

/// Threshold `theta` such that `sum max(v_i - theta, 0) = total`.
fn simplex_threshold(v: &[f64], total: f64) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - total) / (k as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    theta
}

// Per coordinate the projection solves v + nu * v^(p-1) = |x_j|; the outer
// multiplier nu is chosen so that sum v^p = R^p.
fn project_general(x: &[f64], p: f64, radius: f64) -> Result<Vec<f64>, GeometryError> {
    let n = lp_norm(x, Exponent::Finite(p));
    if n <= radius {
        return Ok(x.to_vec());
    }
    // Work on the scaled problem so that the target radius is 1.
    let scale = radius;
    let a: Vec<f64> = x.iter().map(|v| v.abs() / scale).collect();
    let solve_coord = |aj: f64, nu: f64| -> f64 {
        if aj == 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0_f64, aj);
        let mut v = aj / (1.0 + nu);
        for _ in 0..100 {
            let g = v + nu * v.powf(p - 1.0) - aj;
            if g > 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            let dg = 1.0 + nu * (p - 1.0) * v.powf(p - 2.0);
            let mut next = v - g / dg;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - v).abs() <= 1e-15 * aj.max(1e-300) {
                v = next;
                break;
            }
            v = next;
        }
        v
    };
    let excess = |nu: f64| -> f64 {
        a.iter().map(|&aj| solve_coord(aj, nu).powf(p)).sum::<f64>() - 1.0
    };
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut grow = 0;
    while excess(hi) > 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 2000 {
            return Err(GeometryError::ProjectionDiverged {
                iterations: grow,
                residual: excess(hi),
            });
        }
    }
    let mut converged = false;
    let mut nu = hi;
    for _ in 0..PROJECTION_MAX_ITER {
        nu = 0.5 * (lo + hi);
        let e = excess(nu);
        if e > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        if hi - lo <= PROJECTION_TOL * 1e-4 * hi.max(1.0) {
            converged = true;
            nu = hi;
            break;
        }
    }
    if !converged {
        return Err(GeometryError::ProjectionDiverged {
            iterations: PROJECTION_MAX_ITER,
            residual: excess(hi),
        });
    }
    let mut y: Vec<f64> = x
        .iter()
        .zip(&a)
        .map(|(xj, &aj)| xj.signum() * solve_coord(aj, nu) * scale)
        .collect();
    let ny = lp_norm(&y, Exponent::Finite(p));
    if ny > radius {
        let s = radius / ny;
        y.iter_mut().for_each(|v| *v *= s);
    }
    Ok(y)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "simplex projection of an empty vector");
    let theta = simplex_threshold(v, 1.0);
    let mut out: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    // Absorb rounding so the weights sum to one to within an ulp or two.
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        out.iter_mut().for_each(|x| *x /= s);
    } else {
        let m = out.len() as f64;
        out.iter_mut().for_each(|x| *x = 1.0 / m);
    }
    out
}

/// A closed convex feasible set for the algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum FeasibleSet {
    LpBall { p: Exponent, radius: f64 },
    EuclideanBall { radius: f64 },
}

impl FeasibleSet {
    pub fn unit_ball(p: Exponent) -> Self {
        FeasibleSet::LpBall { p, radius: 1.0 }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            FeasibleSet::LpBall { radius, .. } | FeasibleSet::EuclideanBall { radius } => radius,
        }
    }

    fn exponent(&self) -> Exponent {
        match *self {
            FeasibleSet::LpBall { p, .. } => p,
            FeasibleSet::EuclideanBall { .. } => Exponent::two(),
        }
    }

    pub fn gauge(&self, x: &[f64]) -> f64 {
        lp_norm(x, self.exponent())
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.gauge(x) <= self.radius() * (1.0 + tol) + tol
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        project_lp_ball(x, self.exponent(), self.radius())
    }

    /// Support function `max_{x in set} <g, x>`.
    pub fn support(&self, g: &[f64]) -> f64 {
        self.radius() * lp_norm(g, self.exponent().dual())
    }

    /// A uniformly distributed point of the set.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        let mut x = sample_unit_ball(dim, self.exponent(), rng);
        let r = self.radius();
        x.iter_mut().for_each(|v| *v *= r);
        x
    }
}

/// Uniform sample from the unit `l_p` ball.
///
/// Uses the generalized-Gaussian representation: with `y_j` drawn from the
/// density proportional to `exp(-|t|^p)` and `W ~ Exp(1)`, the point
/// `y / (||y||_p^p + W)^(1/p)` is uniform on the ball.
pub fn sample_unit_ball<R: Rng + ?Sized>(dim: usize, p: Exponent, rng: &mut R) -> Vec<f64> {
    match p {
        Exponent::Infinity => (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        Exponent::Finite(q) if q == 2.0 => {
            let mut y: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let n = lp_norm(&y, p);
            let u: f64 = rng.random::<f64>();
            let r = u.powf(1.0 / dim as f64) / n;
            y.iter_mut().for_each(|v| *v *= r);
            y
        }
        Exponent::Finite(q) => {
            let gamma = Gamma::new(1.0 / q, 1.0).expect("valid gamma shape");
            let mut y: Vec<f64> = (0..dim)
                .map(|_| {
                    let g: f64 = gamma.sample(rng);
                    let mag = g.powf(1.0 / q);
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            let w: f64 = Exp1.sample(rng);
            let s: f64 = y.iter().map(|v| v.abs().powf(q)).sum::<f64>() + w;
            let r = s.powf(-1.0 / q);
            y.iter_mut().for_each(|v| *v *= r);
            y
        }
    }
}

/// A uniformly distributed direction on the unit `l_p` sphere.
pub fn sample_unit_sphere<R: Rng + ?Sized>(dim: usize, p: Exponent, rng: &mut R) -> Vec<f64> {
    loop {
        let mut x = sample_unit_ball(dim, p, rng);
        let n = lp_norm(&x, p);
        if n > 0.0 {
            x.iter_mut().for_each(|v| *v /= n);
            return x;
        }
    }
}
