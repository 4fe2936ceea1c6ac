use std::path::Path;

use anyhow::{bail, Context, Result};
use lbx_core::algorithms::{run, AlgorithmSpec, RunConfig, RunResult};
use lbx_core::audit::{feasible_certificate, fstar_upper_bound};
use lbx_core::instance::{HardInstance, InstanceDocument, InstancePlan};
use lbx_core::oracle::{OracleKind, Session};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Loaded;
use crate::gen::load_instances;
use crate::output::{envelope, fmt_opt, read_json, write_csv, write_json, write_text, SCHEMA_VERSION};

struct Cell<'a> {
    id: String,
    instance_seed: u64,
    inst: &'a HardInstance,
    spec: &'a AlgorithmSpec,
    seed: u64,
    hash: String,
    bound: Option<f64>,
}

/// Upper bound on `F*` from the minimax certificate.
pub fn certified_bound(plan: &InstancePlan, inst: &HardInstance) -> Result<f64> {
    let cert = feasible_certificate(inst.family())?;
    Ok(fstar_upper_bound(cert.value, plan.mu, plan.eta, plan.delta_bar))
}

fn instance_digest(inst: &HardInstance) -> String {
    let mut doc = InstanceDocument::from_instance(inst, false);
    doc.config_hash = None;
    hex::encode(Sha256::digest(doc.to_json().as_bytes()))
}

pub fn cmd_run(loaded: &Loaded) -> Result<()> {
    let cfg = &loaded.config;
    if cfg.algorithms.is_empty() {
        bail!("the config lists no algorithms");
    }
    let (plan, instances) = load_instances(loaded)?;
    let dir = &cfg.output.dir;
    let seeds = cfg.run.seeds.expand();
    let mut cells = Vec::new();
    for (instance_seed, inst) in &instances {
        let digest = instance_digest(inst);
        let bound = if cfg.run.stop_at_bound { Some(certified_bound(&plan, inst)?) } else { None };
        for (a, spec) in cfg.algorithms.iter().enumerate() {
            for &seed in &seeds {
                let key = json!({
                    "instance": digest, "algorithm": spec, "budget": cfg.run.budget, "eps": plan.eps,
                    "seed": seed, "recording": cfg.run.recording, "bound": bound,
                });
                cells.push(Cell {
                    id: format!("i{instance_seed}-a{a}-{}-s{seed}", spec.id()),
                    instance_seed: *instance_seed,
                    inst,
                    spec,
                    seed,
                    hash: hex::encode(Sha256::digest(key.to_string().as_bytes())),
                    bound,
                });
            }
        }
    }
    let outcomes: Vec<(RunResult, bool)> = cells.par_iter().map(|c| run_cell(loaded, &plan, c)).collect::<Result<_>>()?;
    let reused = outcomes.iter().filter(|(_, r)| *r).count();

    let results: Vec<Value> = cells
        .iter()
        .zip(&outcomes)
        .map(|(c, (r, _))| json!({ "cell": c.id, "instance_seed": c.instance_seed, "result": r }))
        .collect();
    write_json(&dir.join("results.json"), &envelope(&loaded.hash, "results", &results)?)?;
    let rows: Vec<Vec<String>> = cells
        .iter()
        .zip(&outcomes)
        .map(|(c, (r, _))| {
            vec![
                c.id.clone(),
                c.instance_seed.to_string(),
                r.algorithm.clone(),
                r.hyperparameters.to_string(),
                r.seed.to_string(),
                r.rounds_used.to_string(),
                r.best_value.to_string(),
                fmt_opt(r.reached_at),
                fmt_opt(r.target),
            ]
        })
        .collect();
    let header = ["cell", "instance_seed", "algorithm", "hyperparameters", "seed", "rounds_used", "best_value", "reached_at", "target"];
    write_csv(&dir.join("results.csv"), &loaded.hash, &header, &rows)?;
    println!("{} run(s), {} reused from earlier runs; results in {}", outcomes.len(), reused, dir.display());
    Ok(())
}

/// Runs one cell unless a file with the same cell hash exists. Returns the
/// result and whether it was reused.
fn run_cell(loaded: &Loaded, plan: &InstancePlan, cell: &Cell) -> Result<(RunResult, bool)> {
    let cfg = &loaded.config;
    let dir = &cfg.output.dir;
    let path = dir.join("runs").join(format!("{}.json", cell.id));
    let transcript = dir.join("transcripts").join(format!("{}.jsonl", cell.id));
    let missing_transcript = cfg.run.transcripts && !transcript.exists();
    if let Some(result) = reusable(&path, &cell.hash)?.filter(|_| !missing_transcript) {
        let v = read_json(&path)?;
        if v["config_hash"] != loaded.hash.as_str() {
            write_json(&path, &cell_document(&loaded.hash, cell, &result)?)?;
        }
        return Ok((result, true));
    }
    let mut session = Session::open(cell.inst, OracleKind::for_kappa(plan.kappa), plan.k)?.with_recording(cfg.run.recording);
    let rc = RunConfig { budget: cfg.run.budget, eps: plan.eps, f_ref: cell.bound, seed: cell.seed, keep_point: Some(false) };
    let result = run(cell.spec, &mut session, &rc).with_context(|| format!("cell {}", cell.id))?;
    if cfg.run.transcripts {
        let head = json!({ "schema_version": SCHEMA_VERSION, "config_hash": loaded.hash, "cell": cell.id });
        write_text(&transcript, &format!("{head}\n{}", session.transcript_jsonl()))?;
    }
    write_json(&path, &cell_document(&loaded.hash, cell, &result)?)?;
    Ok((result, false))
}

fn cell_document(hash: &str, cell: &Cell, result: &RunResult) -> Result<Value> {
    let mut v = envelope(hash, "result", result)?;
    v["cell"] = json!(cell.id);
    v["cell_hash"] = json!(cell.hash);
    Ok(v)
}

fn reusable(path: &Path, cell_hash: &str) -> Result<Option<RunResult>> {
    if !path.exists() {
        return Ok(None);
    }
    let v = read_json(path)?;
    if v["cell_hash"] != cell_hash {
        return Ok(None);
    }
    Ok(serde_json::from_value(v["result"].clone()).ok())
}
