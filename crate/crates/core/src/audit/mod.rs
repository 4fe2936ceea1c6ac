//! Certificates, Monte Carlo audits, and bound calculators.

pub mod bounds;
pub mod certificate;
pub mod concentration;
pub mod epsnet;
pub mod gap;
pub mod minimax;

pub use certificate::{dual_certificate, feasible_certificate, fstar_upper_bound, Certificate};
pub use concentration::{concentration_audit, ConcentrationReport, TailRow};
pub use epsnet::{epsnet_count, EpsNetCount};
pub use gap::{gap_audit, gap_verdict, GapVerdict};
pub use minimax::{dense_minimax_audit, MinimaxAudit};
