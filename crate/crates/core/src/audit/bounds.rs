//! Round-complexity lower-bound formulas for each `(p, kappa)` setting, with
//! the implicit `M` inside `ln(MK/gamma)` resolved by fixed-point iteration.

use serde::{Deserialize, Serialize};

use crate::geometry::Exponent;

/// Offset constant the formulas were derived with.
pub const FAITHFUL_C_DELTA: f64 = 16.0;
/// Cap on the fixed-point iterations used to resolve the implicit `M`.
pub const FIXED_POINT_CAP: usize = 50;

/// The settings that have their own lower-bound formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSetting {
    /// Nonsmooth, `1 < p <= 2`, feasible set containing the unit `l_p` ball.
    NonsmoothLowP,
    /// Nonsmooth, `1 <= p <= 2`, over the Euclidean ball inscribed in the unit `l_p` ball.
    NonsmoothInscribed,
    /// Nonsmooth, `p >= 2`, disjoint-support directions.
    NonsmoothHighP,
    /// Weakly smooth of order `kappa in [0, 1]`, `p >= 2`, through local smoothing.
    WeaklySmoothHighP,
    /// Weakly smooth of order `kappa in (0, 1]`, `1 <= p < 2`, by embedding the `p = inf` case.
    WeaklySmoothLowP,
}

impl BoundSetting {
    pub const ALL: [BoundSetting; 5] = [
        BoundSetting::NonsmoothLowP,
        BoundSetting::NonsmoothInscribed,
        BoundSetting::NonsmoothHighP,
        BoundSetting::WeaklySmoothHighP,
        BoundSetting::WeaklySmoothLowP,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BoundSetting::NonsmoothLowP => "nonsmooth_low_p",
            BoundSetting::NonsmoothInscribed => "nonsmooth_inscribed",
            BoundSetting::NonsmoothHighP => "nonsmooth_high_p",
            BoundSetting::WeaklySmoothHighP => "weakly_smooth_high_p",
            BoundSetting::WeaklySmoothLowP => "weakly_smooth_low_p",
        }
    }

    /// Why the setting does not cover `(p, kappa)`, if it does not.
    pub fn inapplicable(self, p: Exponent, kappa: f64) -> Option<&'static str> {
        let pv = p.value();
        match self {
            BoundSetting::NonsmoothLowP if kappa != 0.0 => Some("needs kappa = 0"),
            BoundSetting::NonsmoothLowP if !(pv > 1.0 && pv <= 2.0) => Some("needs 1 < p <= 2"),
            BoundSetting::NonsmoothInscribed if kappa != 0.0 => Some("needs kappa = 0"),
            BoundSetting::NonsmoothInscribed if pv > 2.0 => Some("needs 1 <= p <= 2"),
            BoundSetting::NonsmoothHighP if kappa != 0.0 => Some("needs kappa = 0"),
            BoundSetting::NonsmoothHighP if pv < 2.0 => Some("needs p >= 2"),
            BoundSetting::WeaklySmoothHighP if pv < 2.0 => Some("needs p >= 2"),
            BoundSetting::WeaklySmoothLowP if pv >= 2.0 => Some("needs 1 <= p < 2"),
            BoundSetting::WeaklySmoothLowP if kappa <= 0.0 => Some("needs 0 < kappa <= 1"),
            _ => None,
        }
    }
}

/// Unspecified constants of the low-`p` weakly smooth bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_kappa: f64,
    pub nu: f64,
    pub c_delta: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c_kappa: 1.0,
            nu: 1.0,
            c_delta: FAITHFUL_C_DELTA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub p: Exponent,
    pub kappa: f64,
    pub eps: f64,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub gamma: f64,
    #[serde(default)]
    pub constants: BoundConstants,
}

/// Which side of the `min` defines `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Left,
    Right,
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub setting: BoundSetting,
    pub applicable: bool,
    pub note: Option<String>,
    pub left: f64,
    pub right: Option<f64>,
    /// `min(left, right)` before flooring.
    pub m_raw: f64,
    pub m: u64,
    pub binding: Term,
    /// True when the dimension-free term binds (or the dimension condition holds).
    pub high_dimensional: bool,
    /// `M >= 1` and `M * delta_bar <= mu * eps` at the reported `M`.
    pub feasible: bool,
    /// Constants are placeholders, so only the order of growth is meaningful.
    pub order_only: bool,
    pub log_term: f64,
    pub iterations: usize,
    pub alpha: f64,
    pub delta_bar: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub rows: Vec<BoundRow>,
}

/// `floor(x)` with a relative slack of `1e-12`, so that values such as
/// `1.9999999999999996` that are 2 up to rounding floor to 2.
pub fn floor_count(x: f64) -> u64 {
    if !(x >= 1.0) {
        return 0;
    }
    if x.is_infinite() {
        return u64::MAX;
    }
    (x * (1.0 + 1e-12)).floor() as u64
}

fn inv_pow(x: f64, e: f64) -> f64 {
    (1.0 / x).powf(e)
}

/// `min{p, ln d}`.
pub fn smoothing_log_factor(p: Exponent, d: usize) -> f64 {
    p.min_with((d as f64).ln())
}

/// Left and right terms for the nonsmooth `1 < p <= 2` bound.
pub fn nonsmooth_low_p_terms(p: Exponent, eps: f64, d: usize, log_term: f64) -> (f64, f64) {
    let left = inv_pow(eps, 2.0) / 200.0;
    let right = eps * (d as f64).powf(p.dual().recip()) / (32.0 * log_term.sqrt());
    (left, right)
}

pub fn nonsmooth_inscribed_terms(eps: f64, d: usize, log_term: f64) -> (f64, f64) {
    let left = inv_pow(eps, 2.0) / 200.0;
    let right = eps * (d as f64).sqrt() / (32.0 * log_term.sqrt());
    (left, right)
}

pub fn nonsmooth_high_p_terms(p: Exponent, eps: f64, d: usize, log_term: f64) -> (f64, f64) {
    let left = inv_pow(4.0 * eps, p.value());
    let right = eps.powf(2.0 / 3.0) / 8.0 * (d as f64 / log_term).cbrt();
    (left, right)
}

pub fn weakly_smooth_high_p_terms(
    p: Exponent,
    kappa: f64,
    eps: f64,
    d: usize,
    log_term: f64,
) -> (f64, f64) {
    let m = smoothing_log_factor(p, d);
    let (e_left, e_inner, e_outer) = match p {
        Exponent::Finite(p) => (
            p / (1.0 + kappa * (1.0 + p)),
            (1.0 + 3.0 * p + 2.0 * kappa * (1.0 + p)) / (1.0 + p),
            2.0 * (1.0 + p) / (1.0 + kappa * (1.0 + p)),
        ),
        Exponent::Infinity if kappa > 0.0 => (1.0 / kappa, 3.0 + 2.0 * kappa, 2.0 / kappa),
        Exponent::Infinity => (f64::INFINITY, 3.0, f64::INFINITY),
    };
    let mk = m.powf(kappa);
    let left = (1.0 / (2f64.powf(3.0 + 4.0 * kappa) * eps * mk)).powf(e_left);
    let right = d as f64 / (512.0 * log_term) * (2f64.powf(e_inner) * mk * eps).powf(e_outer);
    (left, right)
}

/// The low-`p` weakly smooth bound and whether its dimension condition holds.
pub fn weakly_smooth_low_p(kappa: f64, eps: f64, d: usize, k: usize, gamma: f64, c: BoundConstants) -> (f64, bool) {
    let dk = d as f64 * k as f64 / gamma;
    let m = c.c_kappa / ((1.0 / eps).ln() + kappa * dk.ln().ln()) * inv_pow(eps, 2.0 / (3.0 + 2.0 * kappa));
    let need = (2.0
        * (c.nu * dk).ln().powf(2.0 * kappa / (3.0 + 2.0 * kappa))
        * inv_pow(eps, 6.0 / (3.0 + 2.0 * kappa)))
    .ceil()
        / c.nu;
    (m, d as f64 >= need)
}

/// `ln(MK/gamma)` with `M` clamped below at 1.
pub fn log_term(m: f64, k: usize, gamma: f64) -> f64 {
    (m.max(1.0) * k as f64 / gamma).ln()
}

/// Resolves `M = min(left(ln(MK/gamma)), right(ln(MK/gamma)))` by iterating on
/// the log term, starting from `ln(dK/gamma)`. Returns `(left, right, m, log, iterations)`.
pub fn resolve_implicit<F>(d: usize, k: usize, gamma: f64, terms: F) -> (f64, f64, f64, f64, usize)
where
    F: Fn(f64) -> (f64, f64),
{
    let mut log = (d as f64 * k as f64 / gamma).ln();
    let (mut l, mut r) = terms(log);
    let mut iterations = 0;
    for it in 1..=FIXED_POINT_CAP {
        iterations = it;
        let next = log_term(l.min(r), k, gamma);
        let done = (next - log).abs() <= 1e-15 * log.abs().max(1.0);
        log = next;
        (l, r) = terms(log);
        if done {
            break;
        }
    }
    (l, r, l.min(r), log, iterations)
}

fn high_p_alpha(d: usize, m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    (d as u64 / m) as f64 / 2.0
}

pub fn bound_row(setting: BoundSetting, inputs: &BoundInputs) -> BoundRow {
    let BoundInputs { p, kappa, eps, d, k, gamma, constants } = *inputs;
    let c_delta = constants.c_delta;
    let mut row = BoundRow {
        setting,
        applicable: true,
        note: None,
        left: f64::NAN,
        right: None,
        m_raw: f64::NAN,
        m: 0,
        binding: Term::Single,
        high_dimensional: false,
        feasible: false,
        order_only: setting == BoundSetting::WeaklySmoothLowP,
        log_term: f64::NAN,
        iterations: 0,
        alpha: f64::NAN,
        delta_bar: f64::NAN,
        mu: 1.0,
    };
    if let Some(why) = setting.inapplicable(p, kappa) {
        row.applicable = false;
        row.note = Some(why.to_string());
        return row;
    }
    if setting == BoundSetting::WeaklySmoothLowP {
        let (m, holds) = weakly_smooth_low_p(kappa, eps, d, k, gamma, constants);
        row.left = m;
        row.m_raw = m;
        row.m = floor_count(m);
        row.high_dimensional = holds;
        row.feasible = holds && row.m >= 1;
        row.log_term = (d as f64 * k as f64 / gamma).ln();
        row.note = Some("order only: c_kappa and nu are placeholders".into());
        return row;
    }
    let (l, r, m_raw, _, iterations) = match setting {
        BoundSetting::NonsmoothLowP => resolve_implicit(d, k, gamma, |lt| nonsmooth_low_p_terms(p, eps, d, lt)),
        BoundSetting::NonsmoothInscribed => resolve_implicit(d, k, gamma, |lt| nonsmooth_inscribed_terms(eps, d, lt)),
        BoundSetting::NonsmoothHighP => resolve_implicit(d, k, gamma, |lt| nonsmooth_high_p_terms(p, eps, d, lt)),
        BoundSetting::WeaklySmoothHighP => {
            resolve_implicit(d, k, gamma, |lt| weakly_smooth_high_p_terms(p, kappa, eps, d, lt))
        }
        BoundSetting::WeaklySmoothLowP => unreachable!(),
    };
    row.left = l;
    row.right = Some(r);
    row.m_raw = m_raw;
    row.m = floor_count(m_raw);
    row.binding = if l <= r { Term::Left } else { Term::Right };
    row.high_dimensional = l <= r;
    row.iterations = iterations;
    let mf = row.m as f64;
    row.log_term = log_term(mf, k, gamma);
    row.alpha = match setting {
        BoundSetting::NonsmoothLowP => (d as f64).powf(2.0 * p.dual().recip()),
        BoundSetting::NonsmoothInscribed => d as f64,
        _ => high_p_alpha(d, row.m),
    };
    row.delta_bar = c_delta * (row.log_term / row.alpha).sqrt();
    if setting == BoundSetting::WeaklySmoothHighP && kappa > 0.0 {
        let eta = row.delta_bar / 8.0;
        row.mu = 2f64.powf(1.0 - kappa) * (smoothing_log_factor(p, d) / eta).powf(kappa);
    }
    row.feasible = row.m >= 1 && mf * row.delta_bar <= row.mu * eps * (1.0 + 1e-12);
    row
}

/// Evaluates every setting; inapplicable ones are marked rather than omitted.
pub fn bound_table(inputs: &BoundInputs) -> BoundReport {
    BoundReport {
        inputs: *inputs,
        rows: BoundSetting::ALL.iter().map(|s| bound_row(*s, inputs)).collect(),
    }
}
