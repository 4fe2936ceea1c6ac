use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn lbx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbx")).current_dir(dir).args(args).output().expect("binary runs")
}

fn lbx_env(dir: &Path, args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbx")).current_dir(dir).env(key, value).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn demo_config() -> Value {
    json!({
        "setting": {"p": 2, "d": 120, "K": 2, "eps": 0.05, "gamma": 0.1, "mode": "demonstration", "M": 3, "kind": "disjoint"},
        "instances": {"count": 2, "master_seed": 5},
        "algorithms": [
            {"algorithm": "k_subgradient"},
            {"algorithm": "k_mirror_descent", "step": 0.5},
            {"algorithm": "k_random_search"}
        ],
        "run": {"budget": 7, "seeds": {"count": 10, "master_seed": 3}},
        "output": {"dir": "out"},
        "audit": {"concentration": {"samples": 1000}, "minimax": {"seeds": [1, 2]}}
    })
}

fn setup(config: &Value) -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("cfg.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    (tmp, path)
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Every artifact under `dir` except the timestamped log, keyed by relative path.
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "lbx.log" {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_writes_instances_and_plan_deterministically() {
    let (tmp, _) = setup(&demo_config());
    let o = lbx(tmp.path(), &["gen", "-c", "cfg.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("alpha = "));
    let plan: Value = serde_json::from_str(&read(&tmp.path().join("out/plan.json"))).unwrap();
    let files = plan["instances"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        assert!(tmp.path().join("out").join(f.as_str().unwrap()).exists());
    }
    let first = artifacts(&tmp.path().join("out"));
    let o = lbx(tmp.path(), &["gen", "-c", "cfg.json", "--set", "output.dir=again"]);
    assert_eq!(code(&o), 0);
    assert_eq!(first, artifacts(&tmp.path().join("again")));
}

#[test]
fn infeasible_faithful_plan_exits_with_two() {
    let (tmp, _) = setup(&demo_config());
    let o = lbx(tmp.path(), &["gen", "-c", "cfg.json", "--set", "setting.mode=theorem_faithful"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("M * delta_bar <= mu * eps"), "{err}");
}

#[test]
fn bad_config_is_an_internal_error() {
    let (tmp, _) = setup(&demo_config());
    assert_eq!(code(&lbx(tmp.path(), &["gen", "-c", "cfg.json", "--set", "setting.unknown=1"])), 1);
    assert_eq!(code(&lbx(tmp.path(), &["gen", "-c", "missing.json"])), 1);
    assert_eq!(code(&lbx(tmp.path(), &["run", "-c", "cfg.json"])), 1, "run before gen has no instance files");
}

#[test]
fn run_matrix_budget_and_resume() {
    let (tmp, _) = setup(&demo_config());
    assert_eq!(code(&lbx(tmp.path(), &["gen", "-c", "cfg.json", "--set", "instances.count=1"])), 0);
    let o = lbx(tmp.path(), &["run", "-c", "cfg.json", "--set", "instances.count=1", "--budget", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&tmp.path().join("out/results.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 30);
    let results: Value = serde_json::from_str(&read(&tmp.path().join("out/results.json"))).unwrap();
    for r in results["results"].as_array().unwrap() {
        assert_eq!(r["result"]["rounds_used"], 5);
        assert_eq!(r["result"]["curve"].as_array().unwrap().len(), 5);
    }

    let cell = tmp.path().join("out/runs").read_dir().unwrap().next().unwrap().unwrap().path();
    let before = (fs::read(&cell).unwrap(), fs::metadata(&cell).unwrap().modified().unwrap());
    let o = lbx(tmp.path(), &["run", "-c", "cfg.json", "--set", "instances.count=1", "--budget", "5"]);
    assert!(stdout(&o).contains("30 reused"), "{}", stdout(&o));
    assert_eq!(before, (fs::read(&cell).unwrap(), fs::metadata(&cell).unwrap().modified().unwrap()));

    let o = lbx(tmp.path(), &["run", "-c", "cfg.json", "--set", "instances.count=1", "--budget", "6"]);
    assert!(stdout(&o).contains("0 reused"), "{}", stdout(&o));
}

#[test]
fn outputs_are_byte_identical_across_workers_and_directories() {
    let (tmp, _) = setup(&demo_config());
    let mut trees = Vec::new();
    for (dir, workers) in [("a", "1"), ("b", "3")] {
        let set = format!("output.dir={dir}");
        for cmd in ["gen", "run", "audit", "bound", "report"] {
            let o = lbx_env(tmp.path(), &[cmd, "-c", "cfg.json", "--set", &set, "--set", "run.transcripts=true"], "LBX_WORKERS", workers);
            assert!(matches!(code(&o), 0 | 3), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        trees.push(artifacts(&tmp.path().join(dir)));
    }
    assert_eq!(trees[0], trees[1]);
    assert!(tmp.path().join("a/lbx.log").exists());
}

#[test]
fn every_artifact_carries_version_and_hash() {
    let (tmp, _) = setup(&demo_config());
    for cmd in ["gen", "run", "audit", "bound", "report"] {
        lbx(tmp.path(), &[cmd, "-c", "cfg.json", "--set", "run.transcripts=true"]);
    }
    let plan: Value = serde_json::from_str(&read(&tmp.path().join("out/plan.json"))).unwrap();
    let hash = plan["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    let files = artifacts(&tmp.path().join("out"));
    assert!(files.len() > 30);
    for (name, bytes) in files {
        let text = String::from_utf8(bytes).unwrap();
        if name.ends_with(".json") {
            let v: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["schema_version"], 1, "{name}");
            assert_eq!(v["config_hash"], hash.as_str(), "{name}");
        } else if name.ends_with(".csv") {
            let mut lines = text.lines();
            assert!(lines.next().unwrap().starts_with("schema_version,config_hash,"), "{name}");
            assert!(lines.all(|l| l.starts_with(&format!("1,{hash},"))), "{name}");
        } else if name.ends_with(".jsonl") {
            let head: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
            assert_eq!(head["config_hash"], hash.as_str(), "{name}");
        } else {
            assert!(text.contains(&hash), "{name}");
        }
    }
}

#[test]
fn audit_reports_certificate_identity_gap_fraction_and_regime_warnings() {
    let (tmp, _) = setup(&demo_config());
    lbx(tmp.path(), &["gen", "-c", "cfg.json"]);
    lbx(tmp.path(), &["run", "-c", "cfg.json"]);
    let o = lbx(tmp.path(), &["audit", "-c", "cfg.json"]);
    let audit: Value = serde_json::from_str(&read(&tmp.path().join("out/audit.json"))).unwrap();
    let a = &audit["audit"];
    let flags = a["flags"].as_u64().unwrap();
    assert_eq!(code(&o), if flags > 0 { 3 } else { 0 });
    let expect = 3f64.powf(-0.5);
    for row in a["certificate"].as_array().unwrap() {
        assert!((row["value"].as_f64().unwrap() - expect).abs() < 1e-6);
        assert_eq!(row["identity_holds"], true);
    }
    let gap = a["gap"].as_array().unwrap();
    assert_eq!(gap.len(), 3);
    for g in gap {
        assert_eq!(g["runs"], 20);
        let f = g["respected_fraction"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f));
    }
    let warnings: Vec<&str> = a["warnings"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect();
    assert!(warnings.iter().any(|w| w.contains("M * delta_bar <= mu * eps")));
    assert!(stdout(&o).starts_with("warning: "), "warnings come first: {}", stdout(&o));
}

#[test]
fn audit_flags_set_exit_code_three() {
    let mut cfg = demo_config();
    cfg["audit"] = json!({"gap": false, "certificate": true});
    // 4 * mu * eps = 1.2 exceeds every certificate, so each row is flagged.
    cfg["setting"]["eps"] = json!(0.3);
    let (tmp, _) = setup(&cfg);
    lbx(tmp.path(), &["gen", "-c", "cfg.json"]);
    let o = lbx(tmp.path(), &["audit", "-c", "cfg.json"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("flag"));
}

fn bound_rows(config: &Value) -> Vec<Value> {
    let (tmp, _) = setup(config);
    let o = lbx(tmp.path(), &["bound", "-c", "cfg.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&read(&tmp.path().join("lbx-out/bound.json"))).unwrap();
    assert!(read(&tmp.path().join("lbx-out/bound.csv")).lines().count() == 3);
    v["bound"]["weakly_smooth"]["rows"].as_array().unwrap().clone()
}

fn row<'a>(rows: &'a [Value], id: &str) -> &'a Value {
    rows.iter().find(|r| r["setting"] == id).unwrap()
}

#[test]
fn bound_rows_follow_the_formulas() {
    let base = |p: Value, kappa: f64, eps: f64, d: u64| json!({"setting": {"p": p, "d": d, "K": 1, "eps": eps, "gamma": 0.05, "kappa": kappa}});

    let rows = bound_rows(&base(json!(2), 0.0, 0.05, 1 << 40));
    let r = row(&rows, "nonsmooth_low_p");
    assert_eq!(r["m"], 2);
    assert_eq!(r["binding"], "left");
    assert!((r["left"].as_f64().unwrap() - 2.0).abs() < 1e-12);

    let d = 1u64 << 40;
    let rows = bound_rows(&base(json!("inf"), 1.0, 0.01, d));
    let r = row(&rows, "weakly_smooth_high_p");
    assert_eq!(r["applicable"], true);
    let expect = 1.0 / (128.0 * 0.01 * (d as f64).ln());
    assert!((r["left"].as_f64().unwrap() - expect).abs() <= 1e-12 * expect);

    let rows = bound_rows(&base(json!(1.5), 0.5, 0.1, 1 << 20));
    let r = row(&rows, "weakly_smooth_low_p");
    assert_eq!(r["applicable"], true);
    assert_eq!(r["order_only"], true);
    assert_eq!(row(&rows, "nonsmooth_high_p")["applicable"], false);
}

#[test]
fn report_collects_artifacts() {
    let (tmp, _) = setup(&demo_config());
    for cmd in ["gen", "run", "audit", "bound", "report"] {
        lbx(tmp.path(), &[cmd, "-c", "cfg.json"]);
    }
    let v: Value = serde_json::from_str(&read(&tmp.path().join("out/report.json"))).unwrap();
    assert_eq!(v["report"]["runs"].as_array().unwrap().len(), 3);
    assert_eq!(v["report"]["plan"]["M"], 3);
    let md = read(&tmp.path().join("out/report.md"));
    assert!(md.contains("| k_subgradient | 20 |"));
}
