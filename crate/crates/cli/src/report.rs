use std::fmt::Write as _;

use anyhow::Result;
use serde_json::{json, Value};

use crate::config::Loaded;
use crate::output::{envelope, read_json, write_json, write_text};

fn read_if_present(loaded: &Loaded, name: &str) -> Result<Option<Value>> {
    let path = loaded.config.output.dir.join(name);
    if path.exists() {
        Ok(Some(read_json(&path)?))
    } else {
        Ok(None)
    }
}

/// Per-algorithm mean rounds and mean best value.
fn run_summary(results: &Value) -> Vec<Value> {
    let mut acc: Vec<(String, usize, f64, f64)> = Vec::new();
    for e in results["results"].as_array().into_iter().flatten() {
        let r = &e["result"];
        let name = r["algorithm"].as_str().unwrap_or("?").to_string();
        let i = match acc.iter().position(|a| a.0 == name) {
            Some(i) => i,
            None => {
                acc.push((name, 0, 0.0, 0.0));
                acc.len() - 1
            }
        };
        acc[i].1 += 1;
        acc[i].2 += r["rounds_used"].as_f64().unwrap_or(0.0);
        acc[i].3 += r["best_value"].as_f64().unwrap_or(f64::NAN);
    }
    acc.into_iter()
        .map(|(a, n, rounds, best)| json!({ "algorithm": a, "runs": n, "mean_rounds": rounds / n as f64, "mean_best_value": best / n as f64 }))
        .collect()
}

/// Collects whatever `gen`, `run`, `audit` and `bound` produced into
/// `report.json` and `report.md`.
pub fn cmd_report(loaded: &Loaded) -> Result<()> {
    let plan = read_if_present(loaded, "plan.json")?;
    let results = read_if_present(loaded, "results.json")?;
    let audit = read_if_present(loaded, "audit.json")?;
    let bound = read_if_present(loaded, "bound.json")?;
    let runs = results.as_ref().map(run_summary).unwrap_or_default();
    let body = json!({
        "plan": plan.as_ref().map(|v| v["plan"].clone()),
        "runs": runs,
        "audit": audit.as_ref().map(|v| v["audit"].clone()),
        "bound": bound.as_ref().map(|v| v["bound"].clone()),
    });
    let dir = &loaded.config.output.dir;
    write_json(&dir.join("report.json"), &envelope(&loaded.hash, "report", &body)?)?;

    let mut md = String::new();
    writeln!(md, "# lbx report\n\nschema_version: {}  \nconfig_hash: `{}`\n", crate::output::SCHEMA_VERSION, loaded.hash)?;
    if let Some(p) = body["plan"].as_object() {
        writeln!(md, "## Plan\n")?;
        for k in ["p", "d", "kind", "M", "L", "K", "eps", "gamma", "kappa", "mode", "alpha", "delta_bar", "mu", "eta"] {
            if let Some(v) = p.get(k) {
                writeln!(md, "- {k}: {v}")?;
            }
        }
        writeln!(md)?;
    }
    if !runs.is_empty() {
        writeln!(md, "## Runs\n\n| algorithm | runs | mean rounds | mean best value |\n|---|---|---|---|")?;
        for r in &runs {
            writeln!(md, "| {} | {} | {} | {} |", r["algorithm"].as_str().unwrap_or("?"), r["runs"], r["mean_rounds"], r["mean_best_value"])?;
        }
        writeln!(md)?;
    }
    if let Some(a) = body["audit"].as_object() {
        writeln!(md, "## Audit\n\nflags raised: {}\n", a.get("flags").cloned().unwrap_or(json!(0)))?;
        for w in a.get("warnings").and_then(Value::as_array).into_iter().flatten() {
            writeln!(md, "- warning: {}", w.as_str().unwrap_or(""))?;
        }
        for g in a.get("gap").and_then(Value::as_array).into_iter().flatten() {
            writeln!(md, "- gap, {}: respected fraction {}", g["algorithm"].as_str().unwrap_or("?"), g["respected_fraction"])?;
        }
        writeln!(md)?;
    }
    if let Some(b) = body["bound"]["weakly_smooth"]["rows"].as_array() {
        writeln!(md, "## Bound\n\n| setting | applicable | M |\n|---|---|---|")?;
        for r in b {
            writeln!(md, "| {} | {} | {} |", r["setting"].as_str().unwrap_or("?"), r["applicable"], r["m"])?;
        }
    }
    write_text(&dir.join("report.md"), &md)?;
    println!("wrote report.json and report.md to {}", dir.display());
    Ok(())
}
