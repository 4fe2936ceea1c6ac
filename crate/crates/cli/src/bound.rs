use anyhow::Result;
use lbx_core::audit::bounds::{bound_table, BoundInputs, BoundReport, BoundRow, BoundSetting};
use serde_json::json;

use crate::config::Loaded;
use crate::output::{envelope, write_csv, write_json};

/// Table columns: `p` regimes, each naming the setting that fills it for the
/// nonsmooth and the weakly smooth row.
const COLUMNS: [(&str, BoundSetting, BoundSetting); 3] = [
    ("1<p<=2 unit ball", BoundSetting::NonsmoothLowP, BoundSetting::WeaklySmoothLowP),
    ("1<=p<=2 inscribed ball", BoundSetting::NonsmoothInscribed, BoundSetting::WeaklySmoothLowP),
    ("p>=2", BoundSetting::NonsmoothHighP, BoundSetting::WeaklySmoothHighP),
];

pub fn bound_inputs(loaded: &Loaded) -> BoundInputs {
    let s = &loaded.config.setting;
    let mut constants = loaded.config.bound_constants;
    if let Some(c) = s.c_delta {
        constants.c_delta = c;
    }
    BoundInputs { p: s.p, kappa: s.kappa, eps: s.eps, d: s.d, k: s.k, gamma: s.gamma, constants }
}

fn find(report: &BoundReport, s: BoundSetting) -> &BoundRow {
    report.rows.iter().find(|r| r.setting == s).expect("every setting has a row")
}

fn cell(row: &BoundRow) -> String {
    if row.applicable {
        row.m.to_string()
    } else {
        String::new()
    }
}

pub fn cmd_bound(loaded: &Loaded) -> Result<()> {
    let inputs = bound_inputs(loaded);
    let smooth = bound_table(&inputs);
    let nonsmooth = bound_table(&BoundInputs { kappa: 0.0, ..inputs });
    println!("p = {}, kappa = {}, eps = {}, d = {}, K = {}, gamma = {}", inputs.p, inputs.kappa, inputs.eps, inputs.d, inputs.k, inputs.gamma);
    println!("{:<22} {:>10} {:>12} {:>12} {:>7} {:>6}  note", "setting", "M", "left", "right", "binds", "feas");
    for row in &smooth.rows {
        let right = row.right.map(|r| format!("{r:.4e}")).unwrap_or_else(|| "-".into());
        let binds = match row.binding {
            lbx_core::audit::bounds::Term::Left => "left",
            lbx_core::audit::bounds::Term::Right => "right",
            lbx_core::audit::bounds::Term::Single => "-",
        };
        if row.applicable {
            println!(
                "{:<22} {:>10} {:>12.4e} {:>12} {:>7} {:>6}  {}",
                row.setting.id(),
                row.m,
                row.left,
                right,
                binds,
                row.feasible,
                row.note.as_deref().unwrap_or("")
            );
        } else {
            println!("{:<22} {:>10}  n/a: {}", row.setting.id(), "-", row.note.as_deref().unwrap_or(""));
        }
    }
    let classes = [(format!("nonsmooth (kappa=0)"), &nonsmooth, 0usize), (format!("weakly smooth (kappa={})", inputs.kappa), &smooth, 1)];
    let rows: Vec<Vec<String>> = classes
        .iter()
        .map(|(name, report, which)| {
            let mut r = vec![name.clone()];
            for (_, ns, ws) in COLUMNS {
                let s = if *which == 0 { ns } else { ws };
                r.push(cell(find(report, s)));
            }
            r
        })
        .collect();
    let mut header = vec!["class"];
    header.extend(COLUMNS.iter().map(|c| c.0));
    let dir = &loaded.config.output.dir;
    write_csv(&dir.join("bound.csv"), &loaded.hash, &header, &rows)?;
    let detail = json!({ "nonsmooth": nonsmooth, "weakly_smooth": smooth });
    write_json(&dir.join("bound.json"), &envelope(&loaded.hash, "bound", &detail)?)?;
    Ok(())
}
