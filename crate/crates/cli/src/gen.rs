use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lbx_core::instance::{plan_parameters, HardInstance, InstanceDocument, InstancePlan};
use rayon::prelude::*;
use serde_json::json;

use crate::config::Loaded;
use crate::output::{envelope, write_json, write_text};

pub fn instance_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("instances").join(format!("instance-{seed}.json"))
}

pub fn cmd_gen(loaded: &Loaded) -> Result<()> {
    let cfg = &loaded.config;
    let plan = plan_parameters(&cfg.setting)?;
    print_plan(&plan);
    let dir = &cfg.output.dir;
    let seeds = cfg.instances.expand();
    let docs: Vec<(u64, String)> = seeds
        .par_iter()
        .map(|&seed| -> Result<(u64, String)> {
            let inst = HardInstance::sample(&plan, seed)?;
            let mut doc = InstanceDocument::from_instance(&inst, cfg.output.with_bits);
            doc.config_hash = Some(loaded.hash.clone());
            Ok((seed, doc.to_json() + "\n"))
        })
        .collect::<Result<_>>()?;
    for (seed, text) in &docs {
        write_text(&instance_path(dir, *seed), text)?;
    }
    let files: Vec<String> = seeds.iter().map(|s| format!("instances/instance-{s}.json")).collect();
    let mut v = envelope(&loaded.hash, "plan", &plan)?;
    v["instances"] = json!(files);
    write_json(&dir.join("plan.json"), &v)?;
    println!("wrote {} instance(s) and plan.json to {}", docs.len(), dir.display());
    Ok(())
}

fn print_plan(plan: &InstancePlan) {
    println!(
        "plan: p = {}, d = {}, kind = {}, M = {}, L = {}, K = {}",
        plan.p, plan.d, plan.kind.name(), plan.m, plan.block, plan.k
    );
    println!("  alpha = {}, delta_bar = {}, mu = {}, eta = {}, r = {}", plan.alpha, plan.delta_bar, plan.mu, plan.eta, plan.r);
    if plan.warnings.is_empty() {
        println!("  feasible: all plan inequalities hold");
    } else {
        for w in &plan.warnings {
            println!("  warning (demonstration mode): {w}");
        }
    }
}

/// Loads the plan and every configured instance written by `gen`.
pub fn load_instances(loaded: &Loaded) -> Result<(InstancePlan, Vec<(u64, HardInstance)>)> {
    let dir = &loaded.config.output.dir;
    let plan_file = dir.join("plan.json");
    let v = crate::output::read_json(&plan_file).context("missing plan; run `lbx gen` first")?;
    let plan: InstancePlan = serde_json::from_value(v["plan"].clone()).with_context(|| format!("parsing {}", plan_file.display()))?;
    let mut out = Vec::new();
    for seed in loaded.config.instances.expand() {
        let path = instance_path(dir, seed);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("missing instance file {}; run `lbx gen` first", path.display()))?;
        let inst = InstanceDocument::from_json(&text)?.to_instance()?;
        out.push((seed, inst));
    }
    Ok((plan, out))
}
