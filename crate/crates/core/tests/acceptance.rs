//! End-to-end acceptance checks. Each test writes one `[PASS]` or `[FAIL]`
//! line straight to stdout so the verdicts show up even when output is captured.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use lbx_core::algorithms::complexity::{estimate_complexity, estimate_from_rounds};
use lbx_core::algorithms::{run, AlgorithmSpec, RunConfig, RunResult};
use lbx_core::audit::bounds::{
    bound_table, nonsmooth_high_p_terms, nonsmooth_inscribed_terms, nonsmooth_low_p_terms, weakly_smooth_high_p_terms,
    weakly_smooth_low_p, BoundConstants, BoundInputs, BoundSetting, Term,
};
use lbx_core::audit::{concentration_audit, dense_minimax_audit, dual_certificate, epsnet_count, fstar_upper_bound, gap_audit};
use lbx_core::geometry::{dot, lp_norm, sample_unit_sphere, Exponent, LpSpace};
use lbx_core::instance::{plan_parameters, sample_family, FamilyKind, HardInstance, InstancePlan, Mode, Setting, VectorFamily};
use lbx_core::oracle::{event_flags, OracleKind, QueryRecording, Session};
use lbx_core::smoothing::{smooth, smoothing_constants, MaxForm, SmoothingConfig};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Vectors at d = 2^22 are 32 MiB, above glibc's largest mmap threshold, so the
// system allocator maps and faults in fresh pages for every one of them.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn verdict(n: u32, pass: bool, started: Instant, budget: &str, summary: String) {
    let line = format!(
        "[{}] criterion {n:>2}: {summary} ({:.1}s, budget {budget})\n",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let mut out = std::io::stdout();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "{line}");
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

fn demo(p: Exponent, d: usize, k: usize, eps: f64, gamma: f64, m: usize) -> Setting {
    let mut s = Setting::new(p, d, k, eps, gamma);
    s.mode = Mode::Demonstration;
    s.m = Some(m);
    s
}

#[test]
fn criterion_01_disjoint_minimax_identity() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for (p, m) in [(2.0, 4usize), (3.0, 6), (4.0, 8), (10.0, 10)] {
        let p = Exponent::new(p).unwrap();
        let space = LpSpace::new(4 * m, p).unwrap();
        let want = (m as f64).powf(-p.recip());
        for seed in 0..20 {
            let f = VectorFamily::sample(space, FamilyKind::Disjoint, m, 4, seed).unwrap();
            let got = dual_certificate(&f).map(|c| c.value).unwrap_or(f64::NAN);
            worst = worst.max((got - want).abs());
            if got.is_nan() {
                worst = f64::INFINITY;
            }
        }
    }
    verdict(1, worst <= 1e-6, t0, "1 min", format!("disjoint certificates, max |cert - M^(-1/p)| = {worst:.2e} <= 1e-6"));
}

#[test]
fn criterion_02_dense_minimax_concentration() {
    let t0 = Instant::now();
    let seeds: Vec<u64> = (0..200).collect();
    let a = dense_minimax_audit(Exponent::two(), 3000, 10, &seeds, None).unwrap();
    let min = a.values.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(
        2,
        a.fraction_below <= 0.05,
        t0,
        "5 min",
        format!(
            "fraction of 200 seeds below {:.4} is {:.3} <= 0.05 (smallest certificate {min:.4})",
            a.threshold, a.fraction_below
        ),
    );
}

/// Terms recomputed here from the closed forms, independently of the crate.
#[test]
fn criterion_03_bound_calculator() {
    let t0 = Instant::now();
    let p2 = Exponent::two();
    let p4 = Exponent::new(4.0).unwrap();
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    checks.push(("low-p left, eps=0.05", nonsmooth_low_p_terms(p2, 0.05, 10, 1.0).0, 2.0));
    checks.push(("high-p left, p=4, eps=0.1", nonsmooth_high_p_terms(p4, 0.1, 10, 1.0).0, 39.0625));
    let row = bound_table(&BoundInputs { p: p4, kappa: 0.0, eps: 0.1, d: 1 << 40, k: 1, gamma: 0.05, constants: BoundConstants::default() })
        .rows
        .into_iter()
        .find(|r| r.setting == BoundSetting::NonsmoothHighP)
        .unwrap();
    checks.push(("high-p floor, p=4, eps=0.1", row.m as f64, 39.0));

    let mut s = demo(p2, 10_000, 1, 0.05, (-1f64).exp(), 1);
    s.kind = Some(FamilyKind::Dense);
    let plan = plan_parameters(&s).unwrap();
    checks.push(("delta_bar at alpha=1e4, log=1", plan.delta_bar, 0.16));

    checks.push((
        "low-p right, p=2, eps=0.05, d=1e6, log=5",
        nonsmooth_low_p_terms(p2, 0.05, 1_000_000, 5.0).1,
        0.05 * 1000.0 / (32.0 * 5f64.sqrt()),
    ));
    checks.push(("inscribed right, eps=0.1, d=1e4, log=4", nonsmooth_inscribed_terms(0.1, 10_000, 4.0).1, 0.15625));
    checks.push((
        "high-p right, p=4, eps=0.1, d=1e6, log=8",
        nonsmooth_high_p_terms(p4, 0.1, 1_000_000, 8.0).1,
        0.1f64.powf(2.0 / 3.0) / 8.0 * 50.0,
    ));
    {
        let (eps, d, log) = (0.01, 1_000_000usize, 5.0);
        let m: f64 = 4.0;
        let left = (1.0 / (128.0 * eps * m)).powf(4.0 / 6.0);
        let right = d as f64 / (512.0 * log) * (2f64.powf(23.0 / 5.0) * m * eps).powf(10.0 / 6.0);
        let (l, r) = weakly_smooth_high_p_terms(p4, 1.0, eps, d, log);
        checks.push(("weakly smooth high-p left, p=4, kappa=1", l, left));
        checks.push(("weakly smooth high-p right, p=4, kappa=1", r, right));
    }
    {
        let (kappa, eps, d, k, gamma) = (0.5, 0.1, 100_000_000usize, 4usize, 0.05);
        let dk = d as f64 * k as f64 / gamma;
        let want = 1.0 / (10f64.ln() + kappa * dk.ln().ln()) * 10f64.powf(2.0 / 4.0);
        checks.push(("weakly smooth low-p, kappa=0.5", weakly_smooth_low_p(kappa, eps, d, k, gamma, BoundConstants::default()).0, want));
    }
    // Full rows: the resolved M must be a fixed point of M = min(left, right)(ln(MK/gamma)).
    let fixed = |inputs: BoundInputs, setting: BoundSetting| {
        let r = bound_table(&inputs).rows.into_iter().find(|r| r.setting == setting).unwrap();
        let log = (r.m_raw.max(1.0) * inputs.k as f64 / inputs.gamma).ln();
        let (l, rr) = match setting {
            BoundSetting::NonsmoothLowP => {
                let q = 1.0 - 1.0 / inputs.p.value();
                (1.0 / (200.0 * inputs.eps.powi(2)), inputs.eps * (inputs.d as f64).powf(q) / (32.0 * log.sqrt()))
            }
            _ => {
                let pv = inputs.p.value();
                (
                    (4.0 * inputs.eps).powf(-pv),
                    inputs.eps.powf(2.0 / 3.0) / 8.0 * (inputs.d as f64 / log).cbrt(),
                )
            }
        };
        (r.m_raw, l.min(rr), r.binding)
    };
    let inp = |p: f64, eps: f64, d: usize| BoundInputs {
        p: Exponent::new(p).unwrap(),
        kappa: 0.0,
        eps,
        d,
        k: 4,
        gamma: 0.05,
        constants: BoundConstants::default(),
    };
    let (got, want, binding) = fixed(inp(2.0, 0.05, 1_000_000_000_000), BoundSetting::NonsmoothLowP);
    checks.push(("low-p row, d=1e12 (left binds)", got, want));
    let left_binds = binding == Term::Left;
    let (got, want, _) = fixed(inp(1.5, 0.05, 10_000), BoundSetting::NonsmoothLowP);
    checks.push(("low-p row, p=1.5, d=1e4 (fixed point)", got, want));
    let (got, want, _) = fixed(inp(4.0, 0.1, 1_000_000_000), BoundSetting::NonsmoothHighP);
    checks.push(("high-p row, p=4, d=1e9 (fixed point)", got, want));

    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| !rel_close(*got, *want, 1e-12))
        .map(|(name, got, want)| format!("{name}: {got} vs {want}"))
        .collect();
    let pass = bad.is_empty() && left_binds && checks.len() >= 12;
    verdict(3, pass, t0, "1 s", format!("{} hand-computed values within 1e-12 relative; mismatches: {:?}", checks.len(), bad));
}

/// Radius uniform in `[0, 2]` along a uniform direction of the unit sphere.
fn ball_point(d: usize, p: Exponent, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t = rng.random_range(0.0..2.0);
    sample_unit_sphere(d, p, rng).into_iter().map(|v| t * v).collect()
}

fn smoothing_setup(p: f64, seed: u64) -> (HardInstance, MaxForm, SmoothingConfig) {
    let p = Exponent::new(p).unwrap();
    let mut s = demo(p, 1000, 1, 0.05, 0.05, 5);
    s.kappa = 1.0;
    s.kind = Some(FamilyKind::Disjoint);
    s.c_delta = Some(0.1);
    let plan = plan_parameters(&s).unwrap();
    let inst = HardInstance::sample(&plan, seed).unwrap();
    let form = inst.max_form();
    let cfg = smoothing_constants(p, 1000, 1.0, 0.05).unwrap();
    (inst, form, cfg)
}

#[test]
fn criterion_04_smoothing_closeness_and_regularity() {
    let t0 = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    for p in [2.0, 4.0] {
        let (_, form, cfg) = smoothing_setup(p, 7);
        let pe = cfg.p;
        let d = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(40 + p as u64);
        let mut worst_close: f64 = 0.0;
        let mut below_zero: f64 = 0.0;
        for _ in 0..1000 {
            let x = ball_point(d, pe, &mut rng);
            let s = smooth(&form, &x, &cfg).unwrap();
            let diff = form.value(&x).unwrap() - s.value;
            worst_close = worst_close.max(diff);
            below_zero = below_zero.min(diff);
        }
        let close_ok = below_zero >= 0.0 && worst_close <= cfg.eta + 1e-6;

        let mut worst_ratio: f64 = 0.0;
        for i in 0..1000 {
            let x = ball_point(d, pe, &mut rng);
            let y: Vec<f64> = if i % 2 == 0 {
                ball_point(d, pe, &mut rng)
            } else {
                let len = cfg.eta * 10f64.powf(rng.random_range(-4.0..0.0));
                let u = sample_unit_sphere(d, pe, &mut rng);
                x.iter().zip(&u).map(|(a, b)| a + len * b).collect()
            };
            let gx = smooth(&form, &x, &cfg).unwrap().gradient;
            let gy = smooth(&form, &y, &cfg).unwrap().gradient;
            let dg: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
            let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let ratio = lp_norm(&dg, pe.dual()) / lp_norm(&dx, pe).powf(cfg.kappa);
            worst_ratio = worst_ratio.max(ratio);
        }
        let holder_ok = worst_ratio <= 1.05 * cfg.mu;

        let h = 1e-5;
        let mut worst_fd: f64 = 0.0;
        let mut used = 0;
        while used < 100 {
            let x = ball_point(d, pe, &mut rng);
            let s = smooth(&form, &x, &cfg).unwrap();
            if s.near_tie || s.tie_margin < 1e-3 || s.constraint_margin < 1e-2 {
                continue;
            }
            used += 1;
            let mut fd = Vec::new();
            let mut an = Vec::new();
            for _ in 0..4 {
                let v = sample_unit_sphere(d, Exponent::two(), &mut rng);
                let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
                let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
                let fp = smooth(&form, &plus, &cfg).unwrap().value;
                let fm = smooth(&form, &minus, &cfg).unwrap().value;
                fd.push((fp - fm) / (2.0 * h));
                an.push(dot(&s.gradient, &v));
            }
            let err: Vec<f64> = fd.iter().zip(&an).map(|(a, b)| a - b).collect();
            let scale = lp_norm(&an, Exponent::two()).max(1e-12);
            worst_fd = worst_fd.max(lp_norm(&err, Exponent::two()) / scale);
        }
        let fd_ok = worst_fd <= 1e-4;
        pass &= close_ok && holder_ok && fd_ok;
        notes.push(format!(
            "p={p}: f-Sf in [{below_zero:.1e}, {worst_close:.4}] vs eta {}, Holder ratio {worst_ratio:.3} vs 1.05*mu {:.3}, FD rel err {worst_fd:.1e}",
            cfg.eta,
            1.05 * cfg.mu
        ));
    }
    verdict(4, pass, t0, "10 min", notes.join("; "));
}

#[test]
fn criterion_05_locality() {
    let t0 = Instant::now();
    let (inst, form, cfg) = smoothing_setup(4.0, 11);
    let plan = inst.plan().clone();
    let fam = inst.family();
    let m = plan.m;
    let ones = vec![1.0; m];
    let sum = fam.combination(&ones);
    let n = lp_norm(&sum, plan.p);
    let x0: Vec<f64> = sum.iter().map(|v| -1.9 * v / n).collect();
    let guard_value = lp_norm(&x0, plan.p) - 2.0 * cfg.eta - inst.guard();
    let below = |f: &VectorFamily, i: usize| {
        0.5 * f.inner(i, &x0) - 0.5 * i as f64 * inst.offset_step() + cfg.eta < guard_value
    };
    let mut other = None;
    for s in 1000..1100 {
        let g = fam.with_row_replaced(m, s);
        if below(fam, m) && below(&g, m) && g.row_bits(m) != fam.row_bits(m) {
            other = Some(g);
            break;
        }
    }
    let Some(other) = other else {
        verdict(5, false, t0, "1 min", "could not build an instance differing only outside the ball".into());
        return;
    };
    let alt = inst.with_family(other).unwrap().max_form();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = sample_unit_sphere(plan.d, plan.p, &mut rng);
        let t = cfg.eta * rng.random_range(0.0..1.0);
        let x: Vec<f64> = x0.iter().zip(&u).map(|(a, b)| a + t * b).collect();
        let a = smooth(&form, &x, &cfg).unwrap();
        let b = smooth(&alt, &x, &cfg).unwrap();
        worst = worst.max((a.value - b.value).abs());
        for (ga, gb) in a.gradient.iter().zip(&b.gradient) {
            worst = worst.max((ga - gb).abs());
        }
    }
    let tol = 10.0 * cfg.inner_tol;
    verdict(5, worst <= tol, t0, "1 min", format!("max value/gradient disagreement {worst:.2e} <= {tol:.0e} at 100 points"));
}

#[test]
fn criterion_06_concentration_audit() {
    let t0 = Instant::now();
    let d = 100;
    let mut s = demo(Exponent::two(), d, 1, 0.05, 0.05, 2);
    s.kind = Some(FamilyKind::Dense);
    let plan = plan_parameters(&s).unwrap();
    let mut probes = Vec::new();
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    probes.push(e1);
    probes.push(vec![1.0 / (d as f64).sqrt(); d]);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..3 {
        probes.push(sample_unit_sphere(d, Exponent::two(), &mut rng));
    }
    let mut flags = Vec::new();
    let mut corrected_flags = 0;
    for (k, x) in probes.iter().enumerate() {
        let r = concentration_audit(&plan, x, &[0.1, 0.2, 0.4], 10_000, 600 + k as u64).unwrap();
        for row in &r.rows {
            if row.flagged {
                flags.push(format!(
                    "probe {k} delta {}: tail {:.4}/{:.4} > bound {:.4}",
                    row.delta, row.upper_tail, row.lower_tail, row.bound
                ));
            }
            if row.upper_wilson[0].max(row.lower_wilson[0]) > row.hoeffding {
                corrected_flags += 1;
            }
        }
    }
    verdict(
        6,
        flags.is_empty(),
        t0,
        "1 min",
        format!("alpha = {}, flags {:?}; flags against exp(-delta^2/(2 sum c^2)): {corrected_flags}", plan.alpha, flags),
    );
}

#[test]
fn criterion_07_event_rate() {
    let t0 = Instant::now();
    let (d, m, k, gamma) = (100_000usize, 5usize, 16usize, 0.05);
    let mut s = demo(Exponent::two(), d, k, 0.05, gamma, m);
    s.kind = Some(FamilyKind::Dense);
    s.c_delta = Some(16.0);
    let plan: InstancePlan = plan_parameters(&s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let queries: Vec<Vec<f64>> = (1..=k)
        .map(|j| {
            let u = sample_unit_sphere(d, Exponent::two(), &mut rng);
            let r = 4.0 * j as f64 / k as f64;
            u.into_iter().map(|v| r * v).collect()
        })
        .collect();
    let norms: Vec<f64> = queries.iter().map(|q| lp_norm(q, Exponent::two())).collect();
    let seeds = 1000;
    let mut held = 0;
    let mut held_inner = 0;
    for seed in 0..seeds {
        let fam = sample_family(&plan, seed).unwrap();
        let inner: Vec<Vec<f64>> = queries.iter().map(|q| fam.inner_all(q).unwrap()).collect();
        let all = |limit: f64| {
            (1..=m).all(|t| {
                inner.iter().zip(&norms).filter(|(_, n)| **n <= limit).all(|(iv, n)| {
                    event_flags(iv, *n, t, plan.delta_bar, 4.0).is_none_or(|f| f.holds())
                })
            })
        };
        held += all(4.0 + 1e-9) as usize;
        held_inner += all(1.0 + 1e-9) as usize;
    }
    let rate = held as f64 / seeds as f64;
    let sigma = (gamma * (1.0 - gamma) / seeds as f64).sqrt();
    let need = 1.0 - gamma - 3.0 * sigma;
    verdict(
        7,
        rate >= need,
        t0,
        "10 min",
        format!(
            "delta_bar {:.4}, event frequency {rate:.3} >= {need:.3} over {seeds} seeds (queries with norm <= 1 only: {:.3})",
            plan.delta_bar,
            held_inner as f64 / seeds as f64
        ),
    );
}

struct GapRuns {
    results: Vec<(String, RunResult, f64)>,
    eps: f64,
    gamma: f64,
}

fn gap_runs() -> &'static GapRuns {
    static RUNS: OnceLock<GapRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let (eps, gamma) = (0.05, 0.05);
        let mut s = demo(Exponent::two(), 1 << 22, 8, eps, gamma, 10);
        s.kind = Some(FamilyKind::Dense);
        s.c_delta = Some(4.0);
        let plan = plan_parameters(&s).unwrap();
        let specs = [AlgorithmSpec::subgradient(), AlgorithmSpec::mirror_descent(), AlgorithmSpec::KRandomSearch];
        let mut results = Vec::new();
        for seed in 0..50u64 {
            let inst = HardInstance::sample(&plan, seed).unwrap();
            let cert = dual_certificate(inst.family()).unwrap().value;
            let bound = fstar_upper_bound(cert, plan.mu, plan.eta, plan.delta_bar);
            for spec in &specs {
                let mut session = Session::open(&inst, OracleKind::Subgradient, plan.k)
                    .unwrap()
                    .with_recording(QueryRecording::Omit);
                let cfg = RunConfig { budget: plan.m, eps, f_ref: Some(bound), seed: 1000 + seed, keep_point: Some(false) };
                let r = run(spec, &mut session, &cfg).unwrap();
                results.push((spec.id().to_string(), r, bound));
            }
        }
        GapRuns { results, eps, gamma }
    })
}

#[test]
fn criterion_08_end_to_end_gap_demonstration() {
    let t0 = Instant::now();
    let runs = gap_runs();
    let respected = runs.results.iter().filter(|(_, r, b)| gap_audit(r, *b, runs.eps).respected).count();
    let min_gap = runs.results.iter().map(|(_, r, b)| gap_audit(r, *b, runs.eps).gap).fold(f64::INFINITY, f64::min);
    let frac = respected as f64 / runs.results.len() as f64;
    verdict(
        8,
        frac >= 0.9,
        t0,
        "15 min",
        format!(
            "demonstration mode: gap respected in {respected}/{} runs ({frac:.3} >= 0.9), smallest gap {min_gap:.4}",
            runs.results.len()
        ),
    );
}

#[test]
fn criterion_09_sequential_sanity() {
    let t0 = Instant::now();
    let eps = 0.1;
    let mut s = demo(Exponent::two(), 10_000, 1, eps, 0.05, 10);
    s.kind = Some(FamilyKind::Dense);
    let plan = plan_parameters(&s).unwrap();
    let inst = HardInstance::sample(&plan, 9).unwrap();
    let cert = dual_certificate(inst.family()).unwrap().value;
    let bound = fstar_upper_bound(cert, plan.mu, plan.eta, plan.delta_bar);
    let mut session = Session::open(&inst, OracleKind::Subgradient, 1).unwrap().with_recording(QueryRecording::Omit);
    let budget = (50.0 / (eps * eps)) as usize;
    let cfg = RunConfig { budget, eps, f_ref: Some(bound), seed: 9, keep_point: Some(false) };
    let r = run(&AlgorithmSpec::subgradient(), &mut session, &cfg).unwrap();
    verdict(
        9,
        r.reached_at.is_some(),
        t0,
        "5 min",
        format!("best {:.4} vs bound + eps {:.4}, reached at round {:?} of {budget}", r.best_value, bound + eps, r.reached_at),
    );
}

/// Nonnegative integer `M`-tuples with sum at most `n`.
fn lattice_points(m: usize, n: usize) -> BigUint {
    let mut ways = vec![BigUint::from(1u32); n + 1];
    for _ in 0..m {
        let mut next = vec![BigUint::from(0u32); n + 1];
        for s in 0..=n {
            let mut acc = BigUint::from(0u32);
            for k in 0..=s {
                acc += &ways[s - k];
            }
            next[s] = acc;
        }
        ways = next;
    }
    ways.swap_remove(n)
}

#[test]
fn criterion_10_epsnet_arithmetic() {
    let t0 = Instant::now();
    let mut mismatches = Vec::new();
    let mut exceed = Vec::new();
    for (eps, inv) in [(1.0, 1usize), (0.5, 2), (0.25, 4)] {
        for m in 1..=20usize {
            let c = epsnet_count(m, eps).unwrap();
            if m <= 6 && c.exact != lattice_points(m, m * inv).to_string() {
                mismatches.push((m, eps));
            }
            let bound = BigUint::from(3 * inv as u64).pow(m as u32);
            let exact: BigUint = c.exact.parse().unwrap();
            if exact > bound {
                exceed.push(format!("(M={m}, eps={eps}: {exact} > {bound})"));
            }
        }
    }
    let first = exceed.first().cloned().unwrap_or_default();
    verdict(
        10,
        mismatches.is_empty() && exceed.is_empty(),
        t0,
        "1 s",
        format!(
            "DP mismatches {:?}; pairs with C(N+M, M) > (3/eps)^M: {} of 60, first {first}",
            mismatches,
            exceed.len()
        ),
    );
}

#[test]
fn criterion_11_complexity_estimator() {
    let t0 = Instant::now();
    let r: Vec<Option<usize>> = [1, 2, 3, 4, 5, 6, 7, 8, 9, 100].iter().map(|v| Some(*v)).collect();
    let e = estimate_from_rounds(&r, 0.1, 0.1).unwrap();
    let synthetic = e.high_probability == 9.0 && e.mean == 14.5;
    let runs = gap_runs();
    let mut batches = Vec::new();
    for id in ["k_subgradient", "k_mirror_descent", "k_random_search"] {
        let batch: Vec<RunResult> = runs.results.iter().filter(|(a, _, _)| a == id).map(|(_, r, _)| r.clone()).collect();
        let est = estimate_complexity(&batch, runs.eps, runs.gamma).unwrap();
        batches.push((id, est.inequality_holds, est.high_probability, est.mean, est.censored));
    }
    let all = batches.iter().all(|b| b.1);
    verdict(
        11,
        synthetic && all,
        t0,
        "shares criterion 8",
        format!("synthetic HP {} mean {}; batches (id, holds, HP, mean, censored) {:?}", e.high_probability, e.mean, batches),
    );
}
