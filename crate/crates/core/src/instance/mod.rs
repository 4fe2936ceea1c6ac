//! Random direction families, protocol parameters, and the nonsmooth hard objective.

pub mod document;
pub mod family;
pub mod hard;
pub mod plan;
pub mod signs;

pub use document::{deserialize, serialize, InstanceDocument, SCHEMA_VERSION};
pub use family::{entry_magnitude, FamilyKind, VectorFamily};
pub use hard::{Branch, Evaluation, HardInstance};
pub use plan::{plan_parameters, InstancePlan, Mode, Setting};

/// Samples the family described by `plan` from `seed`.
pub fn sample_family(plan: &InstancePlan, seed: u64) -> Result<VectorFamily, crate::error::InstanceError> {
    VectorFamily::sample(plan.space(), plan.kind, plan.m, plan.block, seed)
}
