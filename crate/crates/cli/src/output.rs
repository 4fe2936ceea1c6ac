//! Versioned artifact writing.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// `{schema_version, config_hash, <key>: body}`.
pub fn envelope<T: Serialize>(hash: &str, key: &str, body: &T) -> Result<Value> {
    let mut v = json!({ "schema_version": SCHEMA_VERSION, "config_hash": hash });
    v[key] = serde_json::to_value(body)?;
    Ok(v)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// CSV whose first two columns are the schema version and config hash.
pub fn write_csv(path: &Path, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["schema_version", "config_hash"];
    head.extend_from_slice(header);
    w.write_record(&head)?;
    let version = SCHEMA_VERSION.to_string();
    for r in rows {
        let mut rec = vec![version.as_str(), hash];
        rec.extend(r.iter().map(String::as_str));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().context("flushing csv")?;
    write_text(path, std::str::from_utf8(&bytes)?)
}

/// Appends a timestamped line to the sidecar log, the only place where
/// wall-clock time is recorded.
pub fn log_line(dir: &Path, message: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut f = fs::OpenOptions::new().create(true).append(true).open(dir.join("lbx.log"))?;
    writeln!(f, "{secs} {message}")?;
    Ok(())
}

pub fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
