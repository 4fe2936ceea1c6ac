//! JSON instance documents.
//!
//! Sign bits, when present, are base64 of the packed rows: each row is
//! `ceil(L / 64)` little-endian `u64` words, bit `j` of the row sitting in
//! byte `j / 8` at bit `j % 8`. A set bit is a negative entry.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::family::{FamilyKind, VectorFamily};
use super::hard::HardInstance;
use super::plan::{InstancePlan, Mode};
use crate::error::InstanceError;
use crate::geometry::{Exponent, FeasibleSet};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub schema_version: u32,
    pub p: Exponent,
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub kind: FamilyKind,
    #[serde(rename = "L")]
    pub block: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub c_delta: f64,
    pub delta_bar: f64,
    pub eps: f64,
    pub gamma: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub kappa: f64,
    pub mu: f64,
    pub eta: f64,
    pub r: f64,
    pub guard: f64,
    pub alpha: f64,
    pub log_term: f64,
    pub mode: Mode,
    pub offset_step: f64,
    pub value_scale: f64,
    pub feasible: FeasibleSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

fn doc_error(path: &str, message: impl Into<String>) -> InstanceError {
    InstanceError::Document { path: path.into(), message: message.into() }
}

pub fn encode_bits(words: &[u64]) -> String {
    let bytes: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_bits(s: &str) -> Result<Vec<u64>, InstanceError> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| doc_error("entries_b64", format!("invalid base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(doc_error("entries_b64", format!("{} bytes is not a whole number of words", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

impl InstanceDocument {
    /// Describes `inst`; `with_bits` embeds the packed signs.
    pub fn from_instance(inst: &HardInstance, with_bits: bool) -> Self {
        let plan = inst.plan();
        let family = inst.family();
        Self {
            schema_version: SCHEMA_VERSION,
            p: plan.p,
            d: plan.d,
            m: plan.m,
            kind: plan.kind,
            block: family.block(),
            seed: family.seed(),
            c_delta: plan.c_delta,
            delta_bar: plan.delta_bar,
            eps: plan.eps,
            gamma: plan.gamma,
            k: plan.k,
            kappa: plan.kappa,
            mu: plan.mu,
            eta: plan.eta,
            r: plan.r,
            guard: inst.guard(),
            alpha: plan.alpha,
            log_term: plan.log_term,
            mode: plan.mode,
            offset_step: inst.offset_step(),
            value_scale: inst.value_scale(),
            feasible: inst.feasible_set(),
            entries_b64: (with_bits || family.seed().is_none()).then(|| encode_bits(family.packed_bits())),
            config_hash: None,
        }
    }

    pub fn plan(&self) -> InstancePlan {
        InstancePlan {
            p: self.p,
            d: self.d,
            kind: self.kind,
            m: self.m,
            block: self.block,
            k: self.k,
            eps: self.eps,
            gamma: self.gamma,
            kappa: self.kappa,
            mode: self.mode,
            c_delta: self.c_delta,
            alpha: self.alpha,
            log_term: self.log_term,
            delta_bar: self.delta_bar,
            mu: self.mu,
            eta: self.eta,
            r: self.r,
            warnings: Vec::new(),
        }
    }

    /// Rebuilds the instance. Explicit bits win over the seed; when both are
    /// present they must agree.
    pub fn to_instance(&self) -> Result<HardInstance, InstanceError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(doc_error(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let mut plan = self.plan();
        plan.warnings = plan.violations();
        let space = plan.space();
        let family = match (&self.entries_b64, self.seed) {
            (None, None) => return Err(InstanceError::UnderdeterminedFamily),
            (None, Some(seed)) => VectorFamily::sample(space, self.kind, self.m, self.block, seed)?,
            (Some(bits), seed) => {
                let fam = VectorFamily::from_bits(space, self.kind, self.m, self.block, seed, decode_bits(bits)?)?;
                if let Some(seed) = seed {
                    let regenerated = VectorFamily::sample(space, self.kind, self.m, self.block, seed)?;
                    if regenerated.packed_bits() != fam.packed_bits() {
                        return Err(doc_error("entries_b64", format!("sign bits disagree with seed {seed}")));
                    }
                }
                fam
            }
        };
        Ok(HardInstance::from_parts(
            family,
            plan,
            self.offset_step,
            self.guard,
            self.value_scale,
            self.feasible,
        ))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    /// Parses a document; errors carry the JSON path of the offending field.
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            doc_error(&path, e.into_inner().to_string())
        })
    }
}

pub fn serialize(inst: &HardInstance, with_bits: bool) -> String {
    InstanceDocument::from_instance(inst, with_bits).to_json()
}

pub fn deserialize(text: &str) -> Result<HardInstance, InstanceError> {
    InstanceDocument::from_json(text)?.to_instance()
}
