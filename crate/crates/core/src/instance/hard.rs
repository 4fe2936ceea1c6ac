use serde::{Deserialize, Serialize};

use super::family::VectorFamily;
use super::plan::InstancePlan;
use crate::error::{GeometryError, InstanceError};
use crate::geometry::{lp_norm, norming_functional, FeasibleSet};
use crate::smoothing::{AffinePiece, MaxForm};

/// Which term of the max attains the value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "branch", content = "index")]
pub enum Branch {
    /// Affine piece `i` (1-based).
    Affine(usize),
    Guard,
}

/// Value of the hard objective together with the quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub branch: Branch,
    /// `<z^i, x>` for every `i`.
    pub inner: Vec<f64>,
    /// `||x||_p`.
    pub norm: f64,
}

/// `F(x) = s * max{ max_i (<z^i, x> - i * step) / 2, ||x||_p - guard }` with
/// `s = 1/mu` for a freshly planned instance.
#[derive(Debug, Clone, PartialEq)]
pub struct HardInstance {
    family: VectorFamily,
    plan: InstancePlan,
    offset_step: f64,
    guard: f64,
    value_scale: f64,
    feasible: FeasibleSet,
}

impl HardInstance {
    pub fn new(family: VectorFamily, plan: InstancePlan) -> Result<Self, InstanceError> {
        if family.dim() != plan.d || family.len() != plan.m || family.kind() != plan.kind || family.p() != plan.p {
            return Err(InstanceError::InvalidSetting(format!(
                "family ({} x {}, {}) does not match the plan ({} x {}, {})",
                family.len(),
                family.dim(),
                family.kind().name(),
                plan.m,
                plan.d,
                plan.kind.name()
            )));
        }
        Ok(Self {
            offset_step: plan.delta_bar,
            guard: plan.guard(),
            value_scale: 1.0 / plan.mu,
            feasible: plan.feasible_set(),
            family,
            plan,
        })
    }

    /// Samples the family for `plan` from `seed` and assembles the objective.
    pub fn sample(plan: &InstancePlan, seed: u64) -> Result<Self, InstanceError> {
        let family = VectorFamily::sample(plan.space(), plan.kind, plan.m, plan.block, seed)?;
        Self::new(family, plan.clone())
    }

    pub(crate) fn from_parts(
        family: VectorFamily,
        plan: InstancePlan,
        offset_step: f64,
        guard: f64,
        value_scale: f64,
        feasible: FeasibleSet,
    ) -> Self {
        Self { family, plan, offset_step, guard, value_scale, feasible }
    }

    pub fn family(&self) -> &VectorFamily {
        &self.family
    }

    pub fn plan(&self) -> &InstancePlan {
        &self.plan
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn offset_step(&self) -> f64 {
        self.offset_step
    }

    pub fn guard(&self) -> f64 {
        self.guard
    }

    pub fn value_scale(&self) -> f64 {
        self.value_scale
    }

    pub fn feasible_set(&self) -> FeasibleSet {
        self.feasible
    }

    /// The unscaled max and its argmax from precomputed inner products and norm.
    /// Ties go to the lowest affine index; the guard wins only strictly.
    pub fn combine(&self, inner: &[f64], norm: f64) -> (f64, Branch) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = Branch::Guard;
        for (k, &v) in inner.iter().enumerate() {
            let a = 0.5 * (v - (k + 1) as f64 * self.offset_step);
            if a > best {
                best = a;
                arg = Branch::Affine(k + 1);
            }
        }
        let g = norm - self.guard;
        if g > best {
            (g, Branch::Guard)
        } else {
            (best, arg)
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, GeometryError> {
        let inner = self.family.inner_all(x)?;
        let norm = lp_norm(x, self.family.p());
        let (raw, branch) = self.combine(&inner, norm);
        Ok(Evaluation { value: self.value_scale * raw, branch, inner, norm })
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, GeometryError> {
        Ok(self.evaluate(x)?.value)
    }

    /// The subgradient of the branch selected by [`HardInstance::evaluate`].
    pub fn subgradient(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let e = self.evaluate(x)?;
        Ok(self.branch_gradient(x, e.branch))
    }

    pub fn branch_gradient(&self, x: &[f64], branch: Branch) -> Vec<f64> {
        match branch {
            Branch::Affine(i) => {
                let mut g = vec![0.0; self.dim()];
                self.family.add_scaled(i, 0.5 * self.value_scale, &mut g);
                g
            }
            Branch::Guard => {
                let mut g = norming_functional(x, self.family.p());
                g.iter_mut().for_each(|v| *v *= self.value_scale);
                g
            }
        }
    }

    /// The instance stretched to radius `radius` with its values multiplied by
    /// `mu * radius`: the result at `radius * x` equals `mu * radius * F(x)`.
    pub fn rescaled(&self, radius: f64, mu: f64) -> Self {
        let feasible = match self.feasible {
            FeasibleSet::LpBall { p, radius: r } => FeasibleSet::LpBall { p, radius: r * radius },
            FeasibleSet::EuclideanBall { radius: r } => FeasibleSet::EuclideanBall { radius: r * radius },
        };
        Self {
            family: self.family.clone(),
            plan: self.plan.clone(),
            offset_step: self.offset_step * radius,
            guard: self.guard * radius,
            value_scale: self.value_scale * mu,
            feasible,
        }
    }

    /// The same objective over another family with the same layout.
    pub fn with_family(&self, family: VectorFamily) -> Result<Self, InstanceError> {
        let mut out = Self::new(family, self.plan.clone())?;
        out.offset_step = self.offset_step;
        out.guard = self.guard;
        out.value_scale = self.value_scale;
        out.feasible = self.feasible;
        Ok(out)
    }

    /// The unscaled objective as a max of affine pieces plus a norm guard.
    pub fn max_form(&self) -> MaxForm {
        let pieces = (1..=self.family.len())
            .map(|i| {
                let mut slope = vec![0.0; self.dim()];
                self.family.add_scaled(i, 0.5, &mut slope);
                AffinePiece { slope, offset: -0.5 * i as f64 * self.offset_step }
            })
            .collect();
        MaxForm::new(self.family.space(), pieces, Some(self.guard))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Exponent;
    use crate::instance::plan::{plan_parameters, Mode, Setting};

    fn instance(m: usize, c_delta: f64) -> HardInstance {
        let mut s = Setting::new(Exponent::two(), 64, 1, 0.1, 0.05);
        s.m = Some(m);
        s.mode = Mode::Demonstration;
        s.c_delta = Some(c_delta);
        HardInstance::sample(&plan_parameters(&s).unwrap(), 3).unwrap()
    }

    #[test]
    fn origin_selects_first_branch() {
        let inst = instance(2, 1.0);
        let x = vec![0.0; 64];
        let e = inst.evaluate(&x).unwrap();
        assert_eq!(e.branch, Branch::Affine(1));
        assert_eq!(e.value, -0.5 * inst.offset_step());
        let g = inst.subgradient(&x).unwrap();
        let z = inst.family().vector(1);
        assert!(g.iter().zip(&z).all(|(a, b)| *a == 0.5 * b));
    }

    #[test]
    fn far_points_select_the_guard() {
        let inst = instance(2, 1.0);
        let mut x = vec![0.0; 64];
        x[0] = 10.0;
        let e = inst.evaluate(&x).unwrap();
        assert_eq!(e.branch, Branch::Guard);
        let g = inst.subgradient(&x).unwrap();
        assert_eq!(g[0], 1.0);
        assert!(g[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rescaling_is_exact_for_powers_of_two() {
        let inst = instance(3, 1.0);
        let big = inst.rescaled(4.0, 2.0);
        let x: Vec<f64> = (0..64).map(|j| ((j as f64) * 0.3).sin() / 8.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v).collect();
        assert_eq!(big.value(&y).unwrap(), 8.0 * inst.value(&x).unwrap());
    }
}
