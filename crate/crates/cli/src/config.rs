//! The experiment configuration document and `--set` overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lbx_core::algorithms::AlgorithmSpec;
use lbx_core::audit::bounds::BoundConstants;
use lbx_core::instance::Setting;
use lbx_core::oracle::QueryRecording;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Seeds given explicitly or derived from a master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Derived { count: usize, master_seed: u64 },
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Derived { count: 1, master_seed: 0 }
    }
}

impl Seeds {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Derived { count, master_seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*master_seed);
                (0..*count).map(|_| rng.next_u64()).collect()
            }
        }
    }
}

fn default_budget() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub recording: QueryRecording,
    /// Stop a run once it is within `eps` of the certified bound on `F*`.
    #[serde(default)]
    pub stop_at_bound: bool,
    #[serde(default)]
    pub transcripts: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            budget: default_budget(),
            seeds: Seeds::default(),
            recording: QueryRecording::default(),
            stop_at_bound: false,
            transcripts: false,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("lbx-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Store packed sign bits in instance documents.
    #[serde(default)]
    pub with_bits: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), with_bits: false }
    }
}

fn default_samples() -> usize {
    10_000
}

fn default_deltas() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSection {
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimaxSection {
    #[serde(default)]
    pub seeds: Seeds,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "yes")]
    pub certificate: bool,
    #[serde(default)]
    pub concentration: Option<ConcentrationSection>,
    #[serde(default)]
    pub minimax: Option<MinimaxSection>,
    #[serde(default = "yes")]
    pub gap: bool,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self { certificate: true, concentration: None, minimax: None, gap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    #[serde(default)]
    pub instances: Seeds,
    #[serde(default)]
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub bound_constants: BoundConstants,
}

/// A parsed configuration with the hash that identifies it.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub hash: String,
}

/// Reads `path`, applies `key.path=value` overrides, and hashes the result.
pub fn load(path: &Path, overrides: &[String]) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut raw: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    for o in overrides {
        apply_override(&mut raw, o)?;
    }
    let config: ExperimentConfig = serde_json::from_value(raw).context("invalid config")?;
    let hash = config_hash(&config)?;
    Ok(Loaded { config, hash })
}

/// SHA-256 of the normalized config. The output directory is left out, so
/// relocating results does not change their provenance.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let mut v = serde_json::to_value(config)?;
    if let Some(out) = v.get_mut("output").and_then(Value::as_object_mut) {
        out.remove("dir");
    }
    Ok(hex::encode(Sha256::digest(serde_json::to_string(&v)?.as_bytes())))
}

/// Sets the scalar at a dotted path. The value is read as JSON when it parses
/// and as a string otherwise.
pub fn apply_override(raw: &mut Value, assignment: &str) -> Result<()> {
    let Some((path, text)) = assignment.split_once('=') else {
        bail!("override `{assignment}` is not of the form key.path=value");
    };
    let value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()));
    if value.is_object() || value.is_array() {
        bail!("override `{path}` must be a scalar");
    }
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override path `{path}` has an empty component");
    }
    let mut node = raw;
    for k in &keys[..keys.len() - 1] {
        let obj = node.as_object_mut().with_context(|| format!("override `{path}`: `{k}` is not inside an object"))?;
        node = obj.entry(k.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let last = keys[keys.len() - 1];
    let obj = node.as_object_mut().with_context(|| format!("override `{path}`: parent is not an object"))?;
    if matches!(obj.get(last), Some(Value::Object(_) | Value::Array(_))) {
        bail!("override `{path}` targets a structured field");
    }
    obj.insert(last.to_string(), value);
    Ok(())
}
