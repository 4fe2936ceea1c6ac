use anyhow::Result;
use lbx_core::algorithms::RunResult;
use lbx_core::audit::{
    concentration_audit, dense_minimax_audit, feasible_certificate, fstar_upper_bound, gap_audit, ConcentrationReport, MinimaxAudit,
};
use lbx_core::geometry::Exponent;
use lbx_core::instance::{FamilyKind, InstancePlan};
use serde::Serialize;
use serde_json::Value;

use crate::config::Loaded;
use crate::gen::load_instances;
use crate::output::{envelope, read_json, write_csv, write_json};

/// Tolerance of the disjoint-family identity check.
const IDENTITY_TOL: f64 = 1e-6;

#[derive(Debug, Serialize)]
struct CertificateRow {
    instance_seed: u64,
    kind: FamilyKind,
    value: f64,
    lower_bound: f64,
    /// `M^(-1/p)` for disjoint families.
    expected: Option<f64>,
    /// `4 * mu * eps`.
    threshold: f64,
    identity_holds: Option<bool>,
    exceeds_threshold: bool,
    fstar_bound: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct ProbeReport {
    probe: String,
    report: ConcentrationReport,
}

#[derive(Debug, Serialize)]
struct GapRow {
    algorithm: String,
    runs: usize,
    respected: usize,
    respected_fraction: f64,
    min_gap: f64,
    pass: bool,
}

#[derive(Debug, Default, Serialize)]
struct AuditReport {
    warnings: Vec<String>,
    certificate: Vec<CertificateRow>,
    concentration: Vec<ProbeReport>,
    minimax: Option<MinimaxAudit>,
    gap: Vec<GapRow>,
    skipped: Vec<String>,
    flags: usize,
}

/// Runs the selected audits; the returned report counts raised flags.
pub fn cmd_audit(loaded: &Loaded) -> Result<bool> {
    let cfg = &loaded.config;
    let (plan, instances) = load_instances(loaded)?;
    let mut rep = AuditReport { warnings: plan.warnings.iter().map(|w| w.to_string()).collect(), ..Default::default() };
    let threshold = 4.0 * plan.mu * plan.eps;

    let mut bounds = Vec::new();
    for (seed, inst) in &instances {
        let cert = feasible_certificate(inst.family())?;
        let fstar_bound = fstar_upper_bound(cert.value, plan.mu, plan.eta, plan.delta_bar);
        bounds.push((*seed, fstar_bound));
        let expected = (plan.kind == FamilyKind::Disjoint).then(|| (plan.m as f64).powf(-plan.p.recip()));
        let identity_holds = expected.map(|e| (cert.value - e).abs() <= IDENTITY_TOL);
        let exceeds_threshold = cert.value > threshold;
        rep.certificate.push(CertificateRow {
            instance_seed: *seed,
            kind: plan.kind,
            value: cert.value,
            lower_bound: cert.lower_bound,
            expected,
            threshold,
            identity_holds,
            exceeds_threshold,
            fstar_bound,
            pass: identity_holds.unwrap_or(true) && exceeds_threshold,
        });
    }
    if !cfg.audit.certificate {
        rep.certificate.clear();
    }

    if let Some(c) = &cfg.audit.concentration {
        for (name, x) in probes(&plan) {
            let report = concentration_audit(&plan, &x, &c.deltas, c.samples, c.seed)?;
            rep.concentration.push(ProbeReport { probe: name, report });
        }
    }

    if let Some(m) = &cfg.audit.minimax {
        if matches!(plan.p, Exponent::Finite(v) if v > 1.0 && v <= 2.0) {
            let audit = dense_minimax_audit(plan.p, plan.d, plan.m, &m.seeds.expand(), Some((plan.eps * plan.mu, plan.gamma)))?;
            if let Some(r) = audit.regime.as_ref().filter(|r| !r.holds) {
                rep.warnings.push(format!("minimax regime violated: M = {} > {}", plan.m, r.max_m));
            }
            rep.minimax = Some(audit);
        } else {
            rep.skipped.push(format!("minimax: needs 1 < p <= 2, got p = {}", plan.p));
        }
    }

    if cfg.audit.gap {
        let path = cfg.output.dir.join("results.json");
        if path.exists() {
            rep.gap = gap_rows(&read_json(&path)?, &bounds, plan.eps, plan.gamma)?;
        } else {
            rep.skipped.push("gap: no results.json; run `lbx run` first".into());
        }
    }

    rep.flags = rep.certificate.iter().filter(|r| !r.pass).count()
        + rep.concentration.iter().filter(|p| p.report.any_flag).count()
        + rep.minimax.iter().filter(|m| m.fraction_below > plan.gamma).count()
        + rep.gap.iter().filter(|g| !g.pass).count();

    for w in &rep.warnings {
        println!("warning: {w}");
    }
    let csv = summary_rows(&rep, &plan);
    let short = |v: &str| v.parse::<f64>().map(|x| format!("{x:.4e}")).unwrap_or_else(|_| v.to_string());
    for r in &csv {
        println!("{:<13} {:<40} {:>11} {:>11}  {}", r[0], r[1], short(&r[2]), short(&r[3]), r[4]);
    }
    for s in &rep.skipped {
        println!("skipped: {s}");
    }
    println!("{} flag(s) raised", rep.flags);
    let dir = &cfg.output.dir;
    write_json(&dir.join("audit.json"), &envelope(&loaded.hash, "audit", &rep)?)?;
    write_csv(&dir.join("audit.csv"), &loaded.hash, &["check", "subject", "value", "threshold", "status"], &csv)?;
    Ok(rep.flags > 0)
}

/// A coordinate vector and the constant vector, both on the boundary of the
/// feasible set.
fn probes(plan: &InstancePlan) -> Vec<(String, Vec<f64>)> {
    let set = plan.feasible_set();
    let on_boundary = |x: Vec<f64>| -> Vec<f64> {
        let g = set.gauge(&x);
        x.iter().map(|v| v * set.radius() / g).collect()
    };
    let mut e1 = vec![0.0; plan.d];
    e1[0] = 1.0;
    vec![("e1".into(), on_boundary(e1)), ("uniform".into(), on_boundary(vec![1.0; plan.d]))]
}

fn gap_rows(results: &Value, bounds: &[(u64, f64)], eps: f64, gamma: f64) -> Result<Vec<GapRow>> {
    let mut rows: Vec<GapRow> = Vec::new();
    for entry in results["results"].as_array().into_iter().flatten() {
        let seed = entry["instance_seed"].as_u64().unwrap_or_default();
        let Some(&(_, bound)) = bounds.iter().find(|(s, _)| *s == seed) else { continue };
        let run: RunResult = serde_json::from_value(entry["result"].clone())?;
        let v = gap_audit(&run, bound, eps);
        let row = match rows.iter_mut().position(|r| r.algorithm == run.algorithm) {
            Some(i) => &mut rows[i],
            None => {
                rows.push(GapRow { algorithm: run.algorithm.clone(), runs: 0, respected: 0, respected_fraction: 0.0, min_gap: f64::INFINITY, pass: true });
                rows.last_mut().expect("just pushed")
            }
        };
        row.runs += 1;
        row.respected += v.respected as usize;
        row.min_gap = row.min_gap.min(v.gap);
    }
    for r in &mut rows {
        r.respected_fraction = r.respected as f64 / r.runs as f64;
        r.pass = r.respected_fraction >= 1.0 - gamma;
    }
    Ok(rows)
}

fn status(pass: bool) -> String {
    if pass { "pass" } else { "flag" }.to_string()
}

fn summary_rows(rep: &AuditReport, plan: &InstancePlan) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for r in &rep.certificate {
        let subject = format!("instance-{}", r.instance_seed);
        if let (Some(e), Some(ok)) = (r.expected, r.identity_holds) {
            out.push(vec!["certificate".into(), format!("{subject} identity"), r.value.to_string(), e.to_string(), status(ok)]);
        }
        out.push(vec!["certificate".into(), format!("{subject} threshold"), r.value.to_string(), r.threshold.to_string(), status(r.exceeds_threshold)]);
    }
    for p in &rep.concentration {
        for row in &p.report.rows {
            out.push(vec![
                "concentration".into(),
                format!("{} delta={}", p.probe, row.delta),
                row.upper_wilson[0].max(row.lower_wilson[0]).to_string(),
                row.bound.to_string(),
                status(!row.flagged),
            ]);
        }
    }
    if let Some(m) = &rep.minimax {
        out.push(vec!["minimax".into(), format!("{} seeds", m.seeds.len()), m.fraction_below.to_string(), plan.gamma.to_string(), status(m.fraction_below <= plan.gamma)]);
    }
    for g in &rep.gap {
        out.push(vec!["gap".into(), g.algorithm.clone(), g.respected_fraction.to_string(), (1.0 - plan.gamma).to_string(), status(g.pass)]);
    }
    out
}
