//! Baseline K-parallel methods driven through an oracle session.

pub mod complexity;
pub mod strategy;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use complexity::{empirical_quantile, estimate_complexity, estimate_from_rounds, ComplexityEstimate};
pub use strategy::{ProbeContext, Speculation, SpeculativeStrategy};

use crate::error::AlgorithmError;
use crate::geometry::{lp_norm, norming_functional, Exponent, FeasibleSet};
use crate::oracle::{Answer, Session};

/// Largest dimension for which the best point is kept by default.
pub const KEEP_POINT_MAX_DIM: usize = 100_000;
/// Largest dimension accepted by the grid method.
pub const GRID_MAX_DIM: usize = 12;
const DIRECTION_MEMORY: usize = 4;

fn unit_step() -> f64 {
    1.0
}

fn default_resolution() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    /// Projected subgradient steps `c / sqrt(t)` on the iterate.
    KSubgradient {
        #[serde(default = "unit_step")]
        step: f64,
        #[serde(default)]
        speculation: Speculation,
    },
    /// Mirror descent with the potential `||x||_q^2 / 2`.
    KMirrorDescent {
        #[serde(default = "unit_step")]
        step: f64,
        #[serde(default)]
        speculation: Speculation,
    },
    /// Accelerated projected gradient with a constant step.
    KAccelerated {
        #[serde(default = "unit_step")]
        step: f64,
        #[serde(default)]
        speculation: Speculation,
    },
    /// `K` independent uniform feasible points per round.
    KRandomSearch,
    /// Deterministic sweep of a grid in `[-R, R]^d`, small `d` only.
    GridCover {
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
}

impl AlgorithmSpec {
    pub fn id(&self) -> &'static str {
        match self {
            AlgorithmSpec::KSubgradient { .. } => "k_subgradient",
            AlgorithmSpec::KMirrorDescent { .. } => "k_mirror_descent",
            AlgorithmSpec::KAccelerated { .. } => "k_accelerated",
            AlgorithmSpec::KRandomSearch => "k_random_search",
            AlgorithmSpec::GridCover { .. } => "grid_cover",
        }
    }

    pub fn subgradient() -> Self {
        AlgorithmSpec::KSubgradient { step: 1.0, speculation: Speculation::Mixed }
    }

    pub fn mirror_descent() -> Self {
        AlgorithmSpec::KMirrorDescent { step: 1.0, speculation: Speculation::Mixed }
    }

    pub fn accelerated() -> Self {
        AlgorithmSpec::KAccelerated { step: 1.0, speculation: Speculation::Mixed }
    }

    fn speculation(&self) -> Speculation {
        match self {
            AlgorithmSpec::KSubgradient { speculation, .. }
            | AlgorithmSpec::KMirrorDescent { speculation, .. }
            | AlgorithmSpec::KAccelerated { speculation, .. } => *speculation,
            _ => Speculation::Mixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Maximum number of rounds.
    pub budget: usize,
    pub eps: f64,
    /// Stop once the best value is within `eps` of this reference.
    #[serde(default)]
    pub f_ref: Option<f64>,
    pub seed: u64,
    /// Keep the best point in the result; defaults to `d <= 100000`.
    #[serde(default)]
    pub keep_point: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: String,
    pub hyperparameters: serde_json::Value,
    pub seed: u64,
    pub instance_seed: Option<u64>,
    pub best_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_point: Option<Vec<f64>>,
    pub rounds_used: usize,
    /// Best value after each round.
    pub curve: Vec<f64>,
    /// First round whose best value met the target, if a target was set.
    pub reached_at: Option<usize>,
    pub target: Option<f64>,
    pub eps: f64,
}

struct Tracker {
    best_value: f64,
    best_point: Option<Vec<f64>>,
    keep: bool,
    curve: Vec<f64>,
    target: Option<f64>,
    reached_at: Option<usize>,
}

impl Tracker {
    fn record(&mut self, queries: &[Vec<f64>], answers: &[Answer]) -> bool {
        for (q, a) in queries.iter().zip(answers) {
            if a.value < self.best_value {
                self.best_value = a.value;
                if self.keep {
                    self.best_point = Some(q.clone());
                }
            }
        }
        self.curve.push(self.best_value);
        if let (Some(t), None) = (self.target, self.reached_at) {
            if self.best_value <= t {
                self.reached_at = Some(self.curve.len());
            }
        }
        self.reached_at.is_some()
    }
}

/// Runs `spec` with its built-in speculation strategy.
pub fn run(spec: &AlgorithmSpec, session: &mut Session<'_>, cfg: &RunConfig) -> Result<RunResult, AlgorithmError> {
    run_with_strategy(spec, spec.speculation().boxed(), session, cfg)
}

/// Runs `spec`, spending extra queries through `strategy`.
pub fn run_with_strategy(
    spec: &AlgorithmSpec,
    mut strategy: Box<dyn SpeculativeStrategy>,
    session: &mut Session<'_>,
    cfg: &RunConfig,
) -> Result<RunResult, AlgorithmError> {
    if cfg.budget == 0 {
        return Err(AlgorithmError::InvalidConfig("budget must be at least one round".into()));
    }
    let inst = session.instance();
    let d = inst.dim();
    let mut tracker = Tracker {
        best_value: f64::INFINITY,
        best_point: None,
        keep: cfg.keep_point.unwrap_or(d <= KEEP_POINT_MAX_DIM),
        curve: Vec::with_capacity(cfg.budget),
        target: cfg.f_ref.map(|f| f + cfg.eps),
        reached_at: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    match spec {
        AlgorithmSpec::KSubgradient { step, .. } | AlgorithmSpec::KMirrorDescent { step, .. } => {
            let mirror = match spec {
                AlgorithmSpec::KMirrorDescent { .. } => Some(mirror_exponent(inst.plan().p, d)),
                _ => None,
            };
            first_order(session, &mut tracker, strategy.as_mut(), &mut rng, cfg.budget, *step, mirror, false)?
        }
        AlgorithmSpec::KAccelerated { step, .. } => {
            first_order(session, &mut tracker, strategy.as_mut(), &mut rng, cfg.budget, *step, None, true)?
        }
        AlgorithmSpec::KRandomSearch => {
            let feasible = inst.feasible_set();
            for _ in 0..cfg.budget {
                let queries: Vec<Vec<f64>> = (0..session.k()).map(|_| feasible.sample_uniform(d, &mut rng)).collect();
                let answers = session.answer_batch(&queries)?;
                if tracker.record(&queries, &answers) {
                    break;
                }
            }
        }
        AlgorithmSpec::GridCover { resolution } => grid_cover(session, &mut tracker, cfg.budget, *resolution)?,
    }
    Ok(RunResult {
        algorithm: spec.id().to_string(),
        hyperparameters: serde_json::to_value(spec).expect("specs serialize"),
        seed: cfg.seed,
        instance_seed: inst.family().seed(),
        best_value: tracker.best_value,
        best_point: tracker.best_point,
        rounds_used: tracker.curve.len(),
        curve: tracker.curve,
        reached_at: tracker.reached_at,
        target: tracker.target,
        eps: cfg.eps,
    })
}

/// `q = min(2, max(p, 1 + 1/ln d))`.
pub fn mirror_exponent(p: Exponent, d: usize) -> f64 {
    let floor = if d > 1 { 1.0 + 1.0 / (d as f64).ln() } else { 2.0 };
    p.value().max(floor).min(2.0)
}

/// Gradient of `||x||_q^2 / 2`.
fn mirror_gradient(x: &[f64], q: Exponent) -> Vec<f64> {
    let n = lp_norm(x, q);
    let mut u = norming_functional(x, q);
    u.iter_mut().for_each(|v| *v *= n);
    u
}

#[allow(clippy::too_many_arguments)]
fn first_order(
    session: &mut Session<'_>,
    tracker: &mut Tracker,
    strategy: &mut dyn SpeculativeStrategy,
    rng: &mut ChaCha8Rng,
    budget: usize,
    step: f64,
    mirror: Option<f64>,
    accelerated: bool,
) -> Result<(), AlgorithmError> {
    let inst = session.instance();
    let family = inst.family();
    let feasible = inst.feasible_set();
    let d = inst.dim();
    let mut x = vec![0.0; d];
    let mut x_prev = if accelerated { vec![0.0; d] } else { Vec::new() };
    let mut directions: VecDeque<Vec<f64>> = VecDeque::new();
    let mut gradient_sum = vec![0.0; d];
    for t in 1..=budget {
        let center = if accelerated {
            let beta = (t as f64 - 1.0) / (t as f64 + 2.0);
            let y: Vec<f64> = x.iter().zip(&x_prev).map(|(a, b)| a + beta * (a - b)).collect();
            feasible.project(&y)?
        } else {
            x.clone()
        };
        let step_t = if accelerated { step } else { step / (t as f64).sqrt() };
        let ctx = ProbeContext {
            round: t,
            center: &center,
            feasible,
            directions: directions.make_contiguous(),
            gradient_sum: &gradient_sum,
            step: step_t,
        };
        let probes = strategy.probes(&ctx, session.k() - 1, rng)?;
        let mut queries = Vec::with_capacity(session.k());
        queries.push(center);
        queries.extend(probes);
        let answers = session.answer_batch(&queries)?;
        if tracker.record(&queries, &answers) {
            break;
        }
        let g = &answers[0].gradient;
        g.add_scaled_to(family, 1.0, &mut gradient_sum);
        let center = queries.swap_remove(0);
        let next = match mirror {
            Some(q) if q != 2.0 => {
                let qe = Exponent::Finite(q);
                let mut theta = mirror_gradient(&center, qe);
                g.add_scaled_to(family, -step_t, &mut theta);
                let y = mirror_gradient(&theta, qe.dual());
                match feasible {
                    FeasibleSet::LpBall { p: fp, radius } if fp == Exponent::Finite(q) => {
                        let n = lp_norm(&y, fp);
                        if n > radius {
                            y.iter().map(|v| v * radius / n).collect()
                        } else {
                            y
                        }
                    }
                    _ => feasible.project(&y)?,
                }
            }
            _ => {
                let mut y = center.clone();
                g.add_scaled_to(family, -step_t, &mut y);
                feasible.project(&y)?
            }
        };
        let mut dir: Vec<f64> = next.iter().zip(&center).map(|(a, b)| a - b).collect();
        let n = lp_norm(&dir, Exponent::two());
        if n > 0.0 {
            dir.iter_mut().for_each(|v| *v /= n);
            if directions.len() == DIRECTION_MEMORY {
                directions.pop_front();
            }
            directions.push_back(dir);
        }
        let old = std::mem::replace(&mut x, next);
        if accelerated {
            x_prev = old;
        }
    }
    Ok(())
}

fn grid_cover(session: &mut Session<'_>, tracker: &mut Tracker, budget: usize, resolution: f64) -> Result<(), AlgorithmError> {
    let inst = session.instance();
    let d = inst.dim();
    if d > GRID_MAX_DIM {
        return Err(AlgorithmError::InvalidConfig(format!("grid cover needs d <= {GRID_MAX_DIM}, got {d}")));
    }
    if !(resolution > 0.0) {
        return Err(AlgorithmError::InvalidConfig(format!("resolution must be positive, got {resolution}")));
    }
    let feasible = inst.feasible_set();
    let radius = feasible.radius();
    let per_axis = (2.0 * radius / resolution).floor() as usize + 1;
    let mut odometer = vec![0usize; d];
    let mut exhausted = false;
    let mut next_point = || -> Option<Vec<f64>> {
        while !exhausted {
            let point: Vec<f64> = odometer.iter().map(|&i| -radius + i as f64 * resolution).collect();
            // Advance the odometer.
            let mut carry = true;
            for digit in odometer.iter_mut() {
                if !carry {
                    break;
                }
                *digit += 1;
                carry = *digit == per_axis;
                if carry {
                    *digit = 0;
                }
            }
            exhausted = carry;
            if feasible.contains(&point, 1e-12) {
                return Some(point);
            }
        }
        None
    };
    for _ in 0..budget {
        let mut queries: Vec<Vec<f64>> = Vec::with_capacity(session.k());
        while queries.len() < session.k() {
            match next_point() {
                Some(pt) => queries.push(pt),
                None => break,
            }
        }
        if queries.is_empty() {
            break;
        }
        // Pad the final batch with its own first point.
        while queries.len() < session.k() {
            queries.push(queries[0].clone());
        }
        let answers = session.answer_batch(&queries)?;
        if tracker.record(&queries, &answers) {
            break;
        }
    }
    Ok(())
}
