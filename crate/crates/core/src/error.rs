use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("exponent must be >= 1 or infinite, got {0}")]
    InvalidExponent(f64),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("ball projection did not converge after {iterations} iterations (residual {residual:e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },
}

/// An inequality that a parameter plan must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `M * delta_bar <= mu * eps`.
    OffsetBudget,
    /// `M * L <= d` for disjoint supports.
    SupportBudget,
    /// `r <= delta_bar / 8`.
    SmoothingRadius,
    /// `eta <= eps * mu / 4`.
    SmoothingAccuracy,
    /// `3(1 + r) + M * delta_bar <= 4`, so the guard constant is at most 2.
    GuardRadius,
    /// The offset constant must be 16 unless demonstration mode is on.
    OffsetConstant,
    /// The minimax certificate must exceed `4 * mu * eps` with the stated confidence.
    CertificateRegime,
    /// At least one round is needed.
    EmptyRounds,
    /// Smoothing needs `p >= 2`.
    SmoothingDomain,
}

impl Condition {
    pub fn inequality(self) -> &'static str {
        match self {
            Condition::OffsetBudget => "M * delta_bar <= mu * eps",
            Condition::SupportBudget => "M * L <= d",
            Condition::SmoothingRadius => "r <= delta_bar / 8",
            Condition::SmoothingAccuracy => "eta <= eps * mu / 4",
            Condition::GuardRadius => "3 * (1 + r) + M * delta_bar <= 4",
            Condition::OffsetConstant => "c_delta = 16",
            Condition::CertificateRegime => "min over the simplex of ||sum lambda_i z^i||_* > 4 * mu * eps",
            Condition::EmptyRounds => "M >= 1",
            Condition::SmoothingDomain => "p >= 2 when kappa > 0",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.inequality())
    }
}

/// A violated plan inequality with both sides evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated (lhs = {}, rhs = {})",
            self.condition, self.lhs, self.rhs
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
    #[error("infeasible configuration: {}", join_violations(.0))]
    Infeasible(Vec<Violation>),
    #[error("underdetermined family: the document has neither a seed nor explicit sign bits")]
    UnderdeterminedFamily,
    #[error("instance document error at `{path}`: {message}")]
    Document { path: String, message: String },
}

impl InstanceError {
    /// The first violated inequality, if this is an infeasibility error.
    pub fn violated(&self) -> Option<Condition> {
        match self {
            InstanceError::Infeasible(v) => v.first().map(|v| v.condition),
            _ => None,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothingError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("smoothing needs p >= 2, got p = {0}")]
    UnsupportedExponent(f64),
    #[error("smoothing needs a regularizer exponent >= 2; 3 ln d = {0} is too small")]
    DimensionTooSmall(f64),
    #[error("invalid smoothing parameter: {0}")]
    InvalidParameter(String),
    #[error("inner solver hit {iterations} iterations: best value {best_value}, certified gap {gap:e}")]
    NotConverged {
        iterations: usize,
        best_value: f64,
        gap: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
    #[error("oracle kind {kind} does not match an instance with kappa = {kappa}")]
    IncompatibleKind { kind: &'static str, kappa: f64 },
    #[error("batch has {got} queries, the session expects exactly {expected}")]
    BatchSize { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("certificate did not converge: best value {best_value}, gap {gap:e} after {iterations} iterations")]
    CertificateGap {
        best_value: f64,
        gap: f64,
        iterations: usize,
    },
    #[error("probe point is outside the feasible set (gauge {gauge} > {radius})")]
    InfeasibleProbe { gauge: f64, radius: f64 },
    #[error("invalid audit input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgorithmError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid algorithm configuration: {0}")]
    InvalidConfig(String),
    #[error("no run results to aggregate")]
    Empty,
    #[error("run targets disagree: {0} vs {1}")]
    TargetMismatch(f64, f64),
}
