//! How a method spends the `K - 1` queries beyond its own iterate.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::geometry::{lp_norm, FeasibleSet};

/// What a strategy may look at when placing probes.
pub struct ProbeContext<'a> {
    pub round: usize,
    pub center: &'a [f64],
    pub feasible: FeasibleSet,
    /// Recent normalized descent directions, newest last.
    pub directions: &'a [Vec<f64>],
    /// Sum of all gradients seen at the iterate.
    pub gradient_sum: &'a [f64],
    /// Current step length.
    pub step: f64,
}

pub trait SpeculativeStrategy: Send {
    fn name(&self) -> &'static str;

    /// `count` feasible probe points.
    fn probes(&mut self, ctx: &ProbeContext<'_>, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>, GeometryError>;
}

/// The built-in strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speculation {
    /// Steps of several lengths along recent descent directions.
    PastDirections,
    /// Points along minus the accumulated gradient.
    GradientSum,
    /// Random feasible perturbations of the iterate.
    Perturbation,
    /// Cycles through the three above.
    #[default]
    Mixed,
}

impl Speculation {
    pub fn boxed(self) -> Box<dyn SpeculativeStrategy> {
        Box::new(self)
    }
}

fn along(center: &[f64], dir: &[f64], len: f64) -> Vec<f64> {
    center.iter().zip(dir).map(|(c, v)| c + len * v).collect()
}

fn perturb(ctx: &ProbeContext<'_>, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = ctx.center.len();
    let noise = ctx.feasible.sample_uniform(d, rng);
    ctx.center.iter().zip(&noise).map(|(c, n)| c + scale * n).collect()
}

impl SpeculativeStrategy for Speculation {
    fn name(&self) -> &'static str {
        match self {
            Speculation::PastDirections => "past_directions",
            Speculation::GradientSum => "gradient_sum",
            Speculation::Perturbation => "perturbation",
            Speculation::Mixed => "mixed",
        }
    }

    fn probes(&mut self, ctx: &ProbeContext<'_>, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>, GeometryError> {
        let mut out = Vec::with_capacity(count);
        let radius = ctx.feasible.radius();
        for slot in 0..count {
            let kind = match *self {
                Speculation::Mixed => [Speculation::PastDirections, Speculation::GradientSum, Speculation::Perturbation][slot % 3],
                other => other,
            };
            // Probe lengths grow geometrically with the slot index.
            let mult = 2f64.powi((slot / 3) as i32 + 1);
            let point = match kind {
                Speculation::PastDirections if !ctx.directions.is_empty() => {
                    let dir = &ctx.directions[ctx.directions.len() - 1 - (slot / 3) % ctx.directions.len()];
                    along(ctx.center, dir, mult * ctx.step)
                }
                Speculation::GradientSum => {
                    let n = lp_norm(ctx.gradient_sum, crate::geometry::Exponent::two());
                    if n > 0.0 {
                        let len = radius * rng.random_range(0.25..1.0) * mult / 2.0;
                        along(ctx.center, ctx.gradient_sum, -len / n)
                    } else {
                        perturb(ctx, 0.5 * radius, rng)
                    }
                }
                _ => perturb(ctx, rng.random_range(0.05..0.5), rng),
            };
            out.push(ctx.feasible.project(&point)?);
        }
        Ok(out)
    }
}
