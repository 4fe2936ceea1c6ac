use serde::{Deserialize, Serialize};

use super::family::FamilyKind;
use crate::audit::bounds::{self, FAITHFUL_C_DELTA};
use crate::error::{Condition, InstanceError, Violation};
use crate::geometry::{Exponent, FeasibleSet, LpSpace};

/// Whether plan inequalities are enforced or merely reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    TheoremFaithful,
    Demonstration,
}

/// User-facing parameters of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub p: Exponent,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    pub gamma: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub mode: Mode,
    /// Forces the round count instead of resolving it from the bound formula.
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_delta: Option<f64>,
    /// Overrides the default layout (dense for `p <= 2`, disjoint otherwise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FamilyKind>,
    /// Overrides the disjoint block length `floor(d / M)`.
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
}

impl Setting {
    pub fn new(p: Exponent, d: usize, k: usize, eps: f64, gamma: f64) -> Self {
        Self {
            p,
            d,
            k,
            eps,
            gamma,
            kappa: 0.0,
            mode: Mode::TheoremFaithful,
            m: None,
            c_delta: None,
            kind: None,
            block: None,
        }
    }
}

/// Fully resolved protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePlan {
    pub p: Exponent,
    pub d: usize,
    pub kind: FamilyKind,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub block: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub mode: Mode,
    pub c_delta: f64,
    pub alpha: f64,
    /// `ln(MK/gamma)`.
    pub log_term: f64,
    pub delta_bar: f64,
    pub mu: f64,
    pub eta: f64,
    pub r: f64,
    /// Inequalities that failed but were tolerated in demonstration mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Violation>,
}

impl InstancePlan {
    pub fn space(&self) -> LpSpace {
        LpSpace { dim: self.d, p: self.p }
    }

    /// `(3(1 + r) + M * delta_bar) / 2`.
    pub fn guard(&self) -> f64 {
        0.5 * (3.0 * (1.0 + self.r) + self.m as f64 * self.delta_bar)
    }

    /// Radius of the inscribed Euclidean ball, `d^(-(1/p - 1/2))`.
    pub fn inscribed_radius(&self) -> f64 {
        (self.d as f64).powf(-(self.p.recip() - 0.5))
    }

    pub fn feasible_set(&self) -> FeasibleSet {
        match self.kind {
            FamilyKind::Inscribed => FeasibleSet::EuclideanBall {
                radius: self.inscribed_radius(),
            },
            _ => FeasibleSet::unit_ball(self.p),
        }
    }

    pub fn is_smoothed(&self) -> bool {
        self.kappa > 0.0
    }

    /// Checks every plan inequality and returns the violated ones.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let m = self.m as f64;
        let mut check = |condition, lhs: f64, rhs: f64| {
            if !(lhs <= rhs * (1.0 + 1e-12)) {
                out.push(Violation { condition, lhs, rhs });
            }
        };
        check(Condition::EmptyRounds, 1.0, m);
        check(Condition::OffsetBudget, m * self.delta_bar, self.mu * self.eps);
        if self.kind == FamilyKind::Disjoint {
            check(Condition::SupportBudget, m * self.block as f64, self.d as f64);
        }
        if self.is_smoothed() {
            check(Condition::SmoothingRadius, self.r, self.delta_bar / 8.0);
            check(Condition::SmoothingAccuracy, self.eta, self.eps * self.mu / 4.0);
        }
        check(Condition::GuardRadius, 3.0 * (1.0 + self.r) + m * self.delta_bar, 4.0);
        if let Some((lhs, rhs)) = self.certificate_regime() {
            check(Condition::CertificateRegime, lhs, rhs);
        }
        if self.mode == Mode::TheoremFaithful {
            check(Condition::OffsetConstant, (self.c_delta - FAITHFUL_C_DELTA).abs(), 0.0);
        }
        out
    }

    /// Sufficient condition, as `(lhs, rhs)` of `lhs <= rhs`, for the minimax
    /// certificate to exceed `4 mu eps` with probability at least `1 - gamma`.
    fn certificate_regime(&self) -> Option<(f64, f64)> {
        let target = 4.0 * self.mu * self.eps;
        if self.m == 1 {
            return Some((target, 1.0 - 1e-12));
        }
        let m = self.m as f64;
        match self.kind {
            FamilyKind::Disjoint => Some((m, (1.0 / target).powf(self.p.value()))),
            FamilyKind::Dense | FamilyKind::Inscribed if self.p.value() <= 2.0 => {
                let e = self.eps * self.mu;
                let left = 1.0 / (200.0 * e * e);
                let right = (self.d as f64 / 12.0 - (1.0 / self.gamma).ln()) / (3.0 / e).ln();
                Some((m, left.min(right)))
            }
            _ => None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> InstanceError {
    InstanceError::InvalidSetting(msg.into())
}

/// Selects the family layout, resolves `M`, and computes `alpha`, `delta_bar`,
/// `mu`, `eta`, `r`. In theorem-faithful mode any violated inequality is an
/// error; in demonstration mode violations are kept as warnings.
pub fn plan_parameters(setting: &Setting) -> Result<InstancePlan, InstanceError> {
    let Setting { p, d, k, eps, gamma, kappa, mode, .. } = *setting;
    if d == 0 {
        return Err(invalid("d must be positive"));
    }
    if k == 0 {
        return Err(invalid("K must be positive"));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(invalid(format!("gamma must lie in (0, 1/2), got {gamma}")));
    }
    if !(0.0..=1.0).contains(&kappa) {
        return Err(invalid(format!("kappa must lie in [0, 1], got {kappa}")));
    }
    let c_delta = setting.c_delta.unwrap_or(FAITHFUL_C_DELTA);
    if !(c_delta > 0.0 && c_delta.is_finite()) {
        return Err(invalid(format!("c_delta must be positive, got {c_delta}")));
    }
    if kappa > 0.0 && p.value() < 2.0 {
        return Err(InstanceError::Infeasible(vec![Violation {
            condition: Condition::SmoothingDomain,
            lhs: 2.0,
            rhs: p.value(),
        }]));
    }
    let kind = setting
        .kind
        .unwrap_or(if p.value() <= 2.0 && kappa == 0.0 { FamilyKind::Dense } else { FamilyKind::Disjoint });
    if kind == FamilyKind::Inscribed && (p.value() > 2.0 || kappa > 0.0) {
        return Err(invalid("the inscribed layout needs 1 <= p <= 2 and kappa = 0"));
    }
    if kappa > 0.0 && kind != FamilyKind::Disjoint {
        return Err(invalid("smoothed instances use the disjoint layout"));
    }

    let m = match setting.m {
        Some(m) => m,
        None => {
            let which = match (kind, kappa > 0.0) {
                (_, true) => bounds::BoundSetting::WeaklySmoothHighP,
                (FamilyKind::Inscribed, _) => bounds::BoundSetting::NonsmoothInscribed,
                (FamilyKind::Disjoint, _) => bounds::BoundSetting::NonsmoothHighP,
                (FamilyKind::Dense, _) => bounds::BoundSetting::NonsmoothLowP,
            };
            let (_, _, m_raw, _, _) = match which {
                bounds::BoundSetting::NonsmoothLowP => bounds::resolve_implicit(d, k, gamma, |lt| {
                    bounds::nonsmooth_low_p_terms(p, eps, d, lt)
                }),
                bounds::BoundSetting::NonsmoothInscribed => {
                    bounds::resolve_implicit(d, k, gamma, |lt| bounds::nonsmooth_inscribed_terms(eps, d, lt))
                }
                bounds::BoundSetting::NonsmoothHighP => {
                    bounds::resolve_implicit(d, k, gamma, |lt| bounds::nonsmooth_high_p_terms(p, eps, d, lt))
                }
                _ => bounds::resolve_implicit(d, k, gamma, |lt| {
                    bounds::weakly_smooth_high_p_terms(p, kappa, eps, d, lt)
                }),
            };
            bounds::floor_count(m_raw).min(usize::MAX as u64) as usize
        }
    };
    if m == 0 {
        return Err(InstanceError::Infeasible(vec![Violation {
            condition: Condition::EmptyRounds,
            lhs: 1.0,
            rhs: 0.0,
        }]));
    }

    let block = match kind {
        FamilyKind::Disjoint => setting.block.unwrap_or(d / m),
        _ => d,
    };
    if block == 0 {
        return Err(InstanceError::Infeasible(vec![Violation {
            condition: Condition::SupportBudget,
            lhs: m as f64,
            rhs: d as f64,
        }]));
    }
    let alpha = match kind {
        FamilyKind::Dense => (d as f64).powf(2.0 * p.dual().recip()),
        FamilyKind::Disjoint => block as f64 / 2.0,
        FamilyKind::Inscribed => d as f64,
    };
    let log_term = bounds::log_term(m as f64, k, gamma);
    let delta_bar = c_delta * (log_term / alpha).sqrt();
    let (mu, eta, r) = if kappa > 0.0 {
        let eta = delta_bar / 8.0;
        let mu = 2f64.powf(1.0 - kappa) * (bounds::smoothing_log_factor(p, d) / eta).powf(kappa);
        (mu, eta, eta)
    } else {
        (1.0, 0.0, 0.0)
    };
    let mut plan = InstancePlan {
        p,
        d,
        kind,
        m,
        block,
        k,
        eps,
        gamma,
        kappa,
        mode,
        c_delta,
        alpha,
        log_term,
        delta_bar,
        mu,
        eta,
        r,
        warnings: Vec::new(),
    };
    let violations = plan.violations();
    match mode {
        Mode::TheoremFaithful if !violations.is_empty() => Err(InstanceError::Infeasible(violations)),
        _ => {
            plan.warnings = violations;
            Ok(plan)
        }
    }
}
