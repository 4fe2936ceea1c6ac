//! The K-parallel local oracle: batched answers, round accounting, transcripts,
//! and the good-history event instrumentation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GeometryError, OracleError};
use crate::instance::{Branch, HardInstance, VectorFamily};
use crate::smoothing::{smooth, MaxForm, SmoothingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Value and deterministic subgradient of the nonsmooth objective.
    Subgradient,
    /// Value and gradient of the smoothed objective.
    Smoothed,
}

impl OracleKind {
    pub fn name(self) -> &'static str {
        match self {
            OracleKind::Subgradient => "subgradient",
            OracleKind::Smoothed => "smoothed",
        }
    }

    /// The kind that matches an instance of smoothness order `kappa`.
    pub fn for_kappa(kappa: f64) -> Self {
        if kappa > 0.0 {
            OracleKind::Smoothed
        } else {
            OracleKind::Subgradient
        }
    }
}

/// How queries are stored in the transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryRecording {
    Omit,
    /// SHA-256 of the little-endian bytes of the query.
    #[default]
    Digest,
    Full,
}

/// A gradient, kept symbolic when it is a multiple of one family vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Gradient {
    /// `scale * z^index`.
    Direction { index: usize, scale: f64 },
    Dense(Vec<f64>),
}

impl Gradient {
    /// Adds `c` times the gradient into `out`.
    pub fn add_scaled_to(&self, family: &VectorFamily, c: f64, out: &mut [f64]) {
        match self {
            Gradient::Direction { index, scale } => family.add_scaled(*index, c * scale, out),
            Gradient::Dense(g) => out.iter_mut().zip(g).for_each(|(o, v)| *o += c * v),
        }
    }

    pub fn to_dense(&self, family: &VectorFamily) -> Vec<f64> {
        match self {
            Gradient::Dense(g) => g.clone(),
            _ => {
                let mut v = vec![0.0; family.dim()];
                self.add_scaled_to(family, 1.0, &mut v);
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub value: f64,
    pub gradient: Gradient,
    /// Active branch of the nonsmooth objective at the query.
    pub branch: Branch,
    /// Branches the answer depends on: the active branch, or the smoothing support.
    pub support: Vec<Branch>,
    /// Certified gap of the smoothed value (zero for subgradient answers).
    pub gap: f64,
    pub near_tie: bool,
    /// `<z^i, x>` for every `i`.
    pub inner: Vec<f64>,
    pub norm: f64,
}

impl Answer {
    /// Largest affine index among the branches this answer depends on.
    pub fn max_affine(&self) -> usize {
        self.support
            .iter()
            .filter_map(|b| match b {
                Branch::Affine(i) => Some(*i),
                Branch::Guard => None,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Event flags of one relevant query in round `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFlags {
    /// `<z^t, x> > -delta_bar / 4` (vacuous once `t > M`).
    pub current: bool,
    /// `<z^i, x> < delta_bar / 4` for every `i > t`.
    pub future: bool,
}

impl EventFlags {
    pub fn holds(self) -> bool {
        self.current && self.future
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryRecord {
    Digest(String),
    Full(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<QueryRecord>,
    pub values: Vec<f64>,
    pub branches: Vec<Branch>,
    /// `None` for queries outside the radius-4 ball.
    pub events: Vec<Option<EventFlags>>,
    pub event_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub per_round: Vec<bool>,
    /// Every round's event held.
    pub all_held: bool,
    /// Rounds before the first failure.
    pub held_through: usize,
}

/// Round flags for the queries of batch `t` (1-based).
pub fn event_flags(inner: &[f64], norm: f64, t: usize, delta_bar: f64, radius: f64) -> Option<EventFlags> {
    if norm > radius {
        return None;
    }
    let m = inner.len();
    let current = t > m || inner[t - 1] > -delta_bar / 4.0;
    let future = inner.iter().skip(t).all(|v| *v < delta_bar / 4.0);
    Some(EventFlags { current, future })
}

pub fn query_digest(x: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in x {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// An oracle session over one instance.
#[derive(Debug, Clone)]
pub struct Session<'a> {
    inst: &'a HardInstance,
    kind: OracleKind,
    k: usize,
    recording: QueryRecording,
    smoothing: Option<(MaxForm, SmoothingConfig)>,
    transcript: Vec<RoundRecord>,
    learned: usize,
}

impl<'a> Session<'a> {
    pub fn open(inst: &'a HardInstance, kind: OracleKind, k: usize) -> Result<Self, OracleError> {
        let kappa = inst.plan().kappa;
        if kind != OracleKind::for_kappa(kappa) {
            return Err(OracleError::IncompatibleKind { kind: kind.name(), kappa });
        }
        if k == 0 {
            return Err(OracleError::BatchSize { expected: 1, got: 0 });
        }
        let smoothing = match kind {
            OracleKind::Smoothed => {
                let plan = inst.plan();
                let cfg = SmoothingConfig::from_log_dim(plan.p, (plan.d as f64).ln(), plan.kappa, plan.eta * radius_scale(inst))?;
                Some((inst.max_form(), cfg))
            }
            OracleKind::Subgradient => None,
        };
        Ok(Self { inst, kind, k, recording: QueryRecording::default(), smoothing, transcript: Vec::new(), learned: 0 })
    }

    pub fn with_recording(mut self, recording: QueryRecording) -> Self {
        self.recording = recording;
        self
    }

    /// Overrides the smoothing configuration (tolerances, caps).
    pub fn with_smoothing(mut self, cfg: SmoothingConfig) -> Self {
        if let Some((_, c)) = self.smoothing.as_mut() {
            *c = cfg;
        }
        self
    }

    pub fn instance(&self) -> &'a HardInstance {
        self.inst
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn round(&self) -> usize {
        self.transcript.len()
    }

    pub fn transcript(&self) -> &[RoundRecord] {
        &self.transcript
    }

    pub fn smoothing_config(&self) -> Option<&SmoothingConfig> {
        self.smoothing.as_ref().map(|(_, c)| c)
    }

    /// The answer at one point; a pure function of the instance and `x`.
    pub fn answer(&self, x: &[f64]) -> Result<Answer, OracleError> {
        let e = self.inst.evaluate(x)?;
        let scale = self.inst.value_scale();
        match &self.smoothing {
            None => {
                let gradient = match e.branch {
                    Branch::Affine(index) => Gradient::Direction { index, scale: 0.5 * scale },
                    Branch::Guard => Gradient::Dense(self.inst.branch_gradient(x, Branch::Guard)),
                };
                Ok(Answer {
                    value: e.value,
                    gradient,
                    branch: e.branch,
                    support: vec![e.branch],
                    gap: 0.0,
                    near_tie: false,
                    inner: e.inner,
                    norm: e.norm,
                })
            }
            Some((form, cfg)) => {
                let s = smooth(form, x, cfg)?;
                let mut g = s.gradient;
                g.iter_mut().for_each(|v| *v *= scale);
                Ok(Answer {
                    value: scale * s.value,
                    gradient: Gradient::Dense(g),
                    branch: e.branch,
                    support: s.support,
                    gap: scale * s.gap,
                    near_tie: s.near_tie,
                    inner: e.inner,
                    norm: e.norm,
                })
            }
        }
    }

    /// Answers one round of exactly `K` queries.
    pub fn answer_batch(&mut self, queries: &[Vec<f64>]) -> Result<Vec<Answer>, OracleError> {
        if queries.len() != self.k {
            return Err(OracleError::BatchSize { expected: self.k, got: queries.len() });
        }
        let d = self.inst.dim();
        if let Some(q) = queries.iter().find(|q| q.len() != d) {
            return Err(GeometryError::DimensionMismatch { expected: d, got: q.len() }.into());
        }
        let answers: Vec<Answer> = if self.k > 1 {
            queries.par_iter().map(|x| self.answer(x)).collect::<Result<_, _>>()?
        } else {
            vec![self.answer(&queries[0])?]
        };
        let t = self.transcript.len() + 1;
        let delta = self.inst.offset_step();
        let radius = 4.0 * radius_scale(self.inst);
        let events: Vec<Option<EventFlags>> =
            answers.iter().map(|a| event_flags(&a.inner, a.norm, t, delta, radius)).collect();
        let event_holds = events.iter().flatten().all(|f| f.holds());
        let queries_rec = match self.recording {
            QueryRecording::Omit => Vec::new(),
            QueryRecording::Digest => queries.iter().map(|q| QueryRecord::Digest(query_digest(q))).collect(),
            QueryRecording::Full => queries.iter().map(|q| QueryRecord::Full(q.clone())).collect(),
        };
        self.learned = answers.iter().map(Answer::max_affine).fold(self.learned, usize::max);
        self.transcript.push(RoundRecord {
            t,
            queries: queries_rec,
            values: answers.iter().map(|a| a.value).collect(),
            branches: answers.iter().map(|a| a.branch).collect(),
            events,
            event_holds,
        });
        Ok(answers)
    }

    pub fn event_log(&self) -> EventSummary {
        let per_round: Vec<bool> = self.transcript.iter().map(|r| r.event_holds).collect();
        let held_through = per_round.iter().take_while(|h| **h).count();
        EventSummary { all_held: held_through == per_round.len(), held_through, per_round }
    }

    /// Largest affine index that any answer so far depended on.
    pub fn learned_prefix(&self) -> usize {
        self.learned
    }

    /// The transcript as JSON lines.
    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.transcript {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Radius factor of a possibly rescaled instance.
fn radius_scale(inst: &HardInstance) -> f64 {
    let base = inst.plan().delta_bar;
    if base > 0.0 {
        inst.offset_step() / base
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{lp_norm, Exponent};
    use crate::instance::{plan_parameters, Mode, Setting};

    fn instance(kappa: f64) -> HardInstance {
        let p = if kappa > 0.0 { Exponent::Finite(4.0) } else { Exponent::two() };
        let mut s = Setting::new(p, 256, 2, 0.1, 0.05);
        s.m = Some(4);
        s.kappa = kappa;
        s.mode = Mode::Demonstration;
        s.c_delta = Some(1.0);
        HardInstance::sample(&plan_parameters(&s).unwrap(), 5).unwrap()
    }

    #[test]
    fn kinds_must_match_smoothness() {
        let flat = instance(0.0);
        assert!(Session::open(&flat, OracleKind::Subgradient, 4).is_ok());
        assert!(Session::open(&flat, OracleKind::Smoothed, 4).is_err());
        let smooth = instance(1.0);
        assert!(matches!(
            Session::open(&smooth, OracleKind::Subgradient, 4),
            Err(OracleError::IncompatibleKind { .. })
        ));
    }

    #[test]
    fn origin_batch_answers_identically() {
        let inst = instance(0.0);
        let mut s = Session::open(&inst, OracleKind::Subgradient, 2).unwrap();
        assert_eq!(s.learned_prefix(), 0);
        let a = s.answer_batch(&[vec![0.0; 256], vec![0.0; 256]]).unwrap();
        assert_eq!(a[0], a[1]);
        assert_eq!(s.round(), 1);
        assert_eq!(s.learned_prefix(), 1);
        assert!(s.event_log().all_held);
        assert!(s.answer_batch(&[vec![0.0; 256]]).is_err());
        assert_eq!(s.round(), 1);
    }

    #[test]
    fn aligned_query_breaks_the_event() {
        let inst = instance(0.0);
        let mut s = Session::open(&inst, OracleKind::Subgradient, 1).unwrap();
        let z = inst.family().vector(3);
        let n = lp_norm(&z, Exponent::two());
        let x: Vec<f64> = z.iter().map(|v| v / n).collect();
        s.answer_batch(&[x.clone()]).unwrap();
        assert!(!s.event_log().all_held);
        let far: Vec<f64> = x.iter().map(|v| 5.0 * v).collect();
        let mut s2 = Session::open(&inst, OracleKind::Subgradient, 1).unwrap();
        s2.answer_batch(&[far]).unwrap();
        assert_eq!(s2.transcript()[0].events[0], None);
        assert!(s2.event_log().all_held);
    }
}
