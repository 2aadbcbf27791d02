//! Acceptance criteria, one line of output per criterion.
//!
//! Runs as a plain binary (`harness = false`). Positional arguments select
//! criteria by number: `cargo test --test acceptance -- 2 3`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use matchprior::approx::{bn_tail, evaluate, lr_tail, p_values, t_statistic, credible_interval, TailFormat};
use matchprior::inference::{fit_full, mle};
use matchprior::model::{exp_ratio_model, logistic_model, Dataset, Model, ParamPoint};
use matchprior::montecarlo::{parse_methods, replicate_data, run_coverage, run_type1, SimConfig, SimReport, DEFAULT_SEED};
use matchprior::numerics::{integrate_ode, simpson, std_normal_cdf};
use matchprior::prior::{
    inv_psi_lambda_prior, inv_psi_prior, matching_log_prior, pde_residual, InitialCondition, Prior, TraceMode,
    TraceOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

/// Collects sub-checks so one failing line lists every miss.
#[derive(Default)]
struct Checks {
    misses: Vec<String>,
    count: usize,
}

impl Checks {
    fn near(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.count += 1;
        if !((got - want).abs() <= tol) {
            self.misses.push(format!("{label}: {got:.4} vs {want} (tol {tol})"));
        }
    }

    fn that(&mut self, label: &str, ok: bool) {
        self.count += 1;
        if !ok {
            self.misses.push(label.to_string());
        }
    }

    fn outcome(self, summary: String) -> Outcome {
        if self.misses.is_empty() {
            Outcome::Pass(format!("{} checks; {summary}", self.count))
        } else {
            Outcome::Fail(format!("{} of {} checks missed: {}; {summary}", self.misses.len(), self.count, self.misses.join("; ")))
        }
    }
}

fn exp_datasets(count: u64, seed: u64) -> Vec<Dataset> {
    let m = exp_ratio_model();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| m.sample(ParamPoint::new(1.0, 1.0), 10, &mut rng).unwrap()).collect()
}

fn criterion_1() -> Outcome {
    let m = exp_ratio_model();
    let opts = TraceOptions::default();
    let pairs = [
        ("(0,xi,-1) vs 1/psi", Prior::Matching(InitialCondition::constant(-1.0)), inv_psi_prior()),
        ("(0,xi,-log xi) vs 1/(psi lambda)", Prior::Matching(InitialCondition::log_lambda()), inv_psi_lambda_prior()),
    ];
    let mut worst = 0.0f64;
    let mut checks = Checks::default();
    for d in exp_datasets(200, 11) {
        for psi0 in [0.5, 1.0, 2.0] {
            for (label, num, ana) in &pairs {
                for f in TailFormat::ALL {
                    let a = p_values(&m, &d, psi0, num, f, &opts).unwrap();
                    let b = p_values(&m, &d, psi0, ana, f, &opts).unwrap();
                    let diff = (a.one_sided - b.one_sided).abs().max((a.two_sided - b.two_sided).abs());
                    worst = worst.max(diff);
                    checks.that(&format!("{label} {f} psi0={psi0}: diff {diff:e}"), diff < 1e-5);
                }
            }
        }
    }
    checks.outcome(format!("max |p_numeric - p_analytic| = {worst:.2e} over 200 datasets"))
}

fn row(report: &SimReport, id: &str) -> [f64; 4] {
    let c = report.method(id).expect("method present");
    [
        c.type1_1sided(TailFormat::Bn),
        c.type1_2sided(TailFormat::Bn),
        c.type1_1sided(TailFormat::Lr),
        c.type1_2sided(TailFormat::Lr),
    ]
}

fn check_row(checks: &mut Checks, report: &SimReport, id: &str, targets: [Option<f64>; 4], tol: f64) {
    let got = row(report, id);
    let names = ["BN 1-sided", "BN 2-sided", "LR 1-sided", "LR 2-sided"];
    for k in 0..4 {
        if let Some(want) = targets[k] {
            checks.near(&format!("{id} {}", names[k]), got[k], want, tol);
        }
    }
}

fn criterion_2() -> Outcome {
    let cfg = SimConfig::exp_ratio(100_000, DEFAULT_SEED);
    let report = run_type1(&cfg).unwrap();
    let mut checks = Checks::default();
    let t = |one: f64, two: f64| [Some(one), Some(two), Some(one), Some(two)];
    check_row(&mut checks, &report, "lrt", t(0.0520, 0.0526), 0.004);
    check_row(&mut checks, &report, "ic-default", t(0.0456, 0.0441), 0.004);
    check_row(&mut checks, &report, "analytic-invpsi", t(0.0456, 0.0441), 0.004);
    check_row(&mut checks, &report, "ic-loglambda", t(0.0499, 0.0498), 0.004);
    check_row(&mut checks, &report, "analytic-invpsilambda", t(0.0499, 0.0498), 0.004);
    let lrt = report.method("lrt").unwrap();
    let se = (0.052f64 * 0.948 / lrt.valid as f64).sqrt();
    checks.near("lrt 1-sided within 4 SE", lrt.type1_1sided(TailFormat::Bn), 0.0520, 4.0 * se);
    checks.that("no degenerate replicates", report.methods.iter().all(|m| m.counts.degenerate == 0));
    let summary = ["lrt", "ic-default", "ic-loglambda"]
        .iter()
        .map(|id| {
            let r = row(&report, id);
            format!("{id} {:.4}/{:.4}", r[0], r[1])
        })
        .collect::<Vec<_>>()
        .join(", ");
    checks.outcome(format!("100000 reps: {summary}"))
}

fn forward_trace() -> TraceOptions {
    TraceOptions::default().with_mode(TraceMode::Forward)
}

fn criterion_3() -> Outcome {
    let mut cfg = SimConfig::logistic(10_000, DEFAULT_SEED);
    cfg.trace = forward_trace();
    let report = run_type1(&cfg).unwrap();
    let mut checks = Checks::default();
    let s = Some;
    check_row(&mut checks, &report, "lrt", [s(0.054), s(0.060), s(0.054), s(0.060)], 0.010);
    check_row(&mut checks, &report, "ic-default", [s(0.052), s(0.057), s(0.052), s(0.057)], 0.010);
    check_row(&mut checks, &report, "qfam:2", [s(0.028), s(0.019), s(0.031), s(0.020)], 0.010);
    check_row(&mut checks, &report, "qfam:2/5", [s(0.041), s(0.041), s(0.044), s(0.046)], 0.010);
    check_row(&mut checks, &report, "qfam:2/11", [s(0.045), s(0.048), s(0.046), s(0.050)], 0.010);
    let clamped = report.method("qfam:2").unwrap().lr_clamped;
    let degenerate = report.methods[0].counts.degenerate;
    checks.outcome(format!(
        "10000 reps, {degenerate} degenerate, qfam:2 LR clamped {clamped}; q=2 BN {:.4}/{:.4}",
        row(&report, "qfam:2")[0],
        row(&report, "qfam:2")[1]
    ))
}

fn criterion_4() -> Outcome {
    let mut cfg = SimConfig::logistic(1_000, DEFAULT_SEED);
    cfg.trace = forward_trace();
    cfg.methods = parse_methods("ic-default,qfam:2/5").unwrap();
    let report = run_coverage(&cfg, 0.95, TailFormat::Bn).unwrap();
    let mut checks = Checks::default();
    let default = report.method("ic-default").unwrap();
    let q = report.method("qfam:2/5").unwrap();
    checks.near("ic-default covered", default.covered as f64, 938.0, 25.0);
    checks.near("qfam:2/5 covered", q.covered as f64, 954.0, 25.0);
    checks.outcome(format!(
        "95% BN intervals: ic-default {}/{}, qfam:2/5 {}/{}",
        default.covered, default.total, q.covered, q.total
    ))
}

fn hl_path() -> PathBuf {
    std::env::var_os("MATCHPRIOR_HL_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/chdage.csv"))
}

fn criterion_5() -> Outcome {
    let path = hl_path();
    if !path.exists() {
        return Outcome::Skip(format!("dataset not found at {} (set MATCHPRIOR_HL_DATA)", path.display()));
    }
    let data = Dataset::read_csv_path(&path).unwrap();
    let m = logistic_model(data.x().to_vec()).unwrap();
    m.validate(&data).unwrap();
    let prior = Prior::Matching(InitialCondition::constant(-1.0));
    let opts = forward_trace();
    let p = p_values(&m, &data, 0.0, &prior, TailFormat::Bn, &opts).unwrap();
    let (lo, hi) = credible_interval(&m, &data, &prior, 0.90, TailFormat::Bn, &opts).unwrap();
    let mut checks = Checks::default();
    checks.that(&format!("n = {} (expected 100)", data.len()), data.len() == 100);
    let rel = (p.two_sided - 5.532326e-8).abs() / 5.532326e-8;
    checks.that(&format!("two-sided p {:.6e} (relative error {rel:.1e})", p.two_sided), rel < 1e-3);
    let r2 = |v: f64| (v * 100.0).round() / 100.0;
    checks.that(&format!("90% interval ({lo:.4}, {hi:.4})"), r2(lo) == 0.07 && r2(hi) == 0.15);
    checks.outcome(format!("two-sided p {:.6e}, 90% interval ({lo:.4}, {hi:.4})", p.two_sided))
}

fn criterion_6() -> Outcome {
    let mut checks = Checks::default();
    let mut worst_numeric = 0.0f64;
    let mut worst_analytic = 0.0f64;
    let grid = |lo: (f64, f64), hi: (f64, f64)| {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push(ParamPoint::new(
                    lo.0 + (hi.0 - lo.0) * i as f64 / 4.0,
                    lo.1 + (hi.1 - lo.1) * j as f64 / 4.0,
                ));
            }
        }
        pts
    };
    let opts = TraceOptions::precise();
    let exp = exp_ratio_model();
    let exp_data = &exp_datasets(1, 3)[0];
    let exp_grid = grid((0.5, 0.5), (2.5, 2.5));
    for ic in [InitialCondition::constant(-1.0), InitialCondition::log_lambda()] {
        let ic = ic.anchored(1.0);
        let z = matching_log_prior(&exp, exp_data, &ic, opts);
        for w in &exp_grid {
            let r = pde_residual(&exp, exp_data, &z, *w).unwrap().abs();
            worst_numeric = worst_numeric.max(r);
            checks.that(&format!("exp-ratio {} at {w:?}: {r:e}", ic.label), r < 1e-4);
        }
    }
    let analytic: [(&str, fn(ParamPoint) -> f64); 2] =
        [("1/psi", |w| -w.psi.ln()), ("1/(psi lambda)", |w| -(w.psi * w.lambda).ln())];
    for (label, f) in analytic {
        let z = |w: ParamPoint| Ok(f(w));
        for w in &exp_grid {
            let r = pde_residual(&exp, exp_data, &z, *w).unwrap().abs();
            worst_analytic = worst_analytic.max(r);
            checks.that(&format!("exp-ratio {label} at {w:?}: {r:e}"), r < 1e-6);
        }
    }
    for n in [10usize, 30] {
        let mut cfg = SimConfig::logistic(1, 99 + n as u64);
        cfg.n = n;
        let (m, d) = replicate_data(&cfg, 0).unwrap();
        let ic = InitialCondition::constant(-1.0).anchored(0.5);
        let z = matching_log_prior(m.as_ref(), &d, &ic, opts);
        for w in grid((-0.5, -2.0), (1.5, 0.0)) {
            let r = pde_residual(m.as_ref(), &d, &z, w).unwrap().abs();
            worst_numeric = worst_numeric.max(r);
            checks.that(&format!("logistic n={n} at {w:?}: {r:e}"), r < 1e-4);
        }
    }
    checks.outcome(format!("max residual numeric {worst_numeric:.1e}, analytic {worst_analytic:.1e}"))
}

fn criterion_7() -> Outcome {
    let mut checks = Checks::default();

    // T = R reduces both formats to Phi(R)
    for r in [-3.0, -1.2, -0.01, 0.4, 2.5] {
        checks.that(&format!("bn T=R at {r}"), bn_tail(r, r).p == std_normal_cdf(r));
        checks.that(&format!("lr T=R at {r}"), lr_tail(r, r).p == std_normal_cdf(r));
    }

    // Z + c leaves T unchanged
    let mut cfg = SimConfig::logistic(1, 5);
    cfg.n = 30;
    let (m, d) = replicate_data(&cfg, 0).unwrap();
    for mode in [TraceMode::Backward, TraceMode::Forward] {
        let opts = TraceOptions::default().with_mode(mode);
        let base = InitialCondition::constant(-1.0);
        let t0 = t_statistic(m.as_ref(), &d, 0.5, &Prior::Matching(base.clone()), &opts).unwrap();
        for c in [-2.0, 0.3, 11.0] {
            let t = t_statistic(m.as_ref(), &d, 0.5, &Prior::Matching(base.shifted(c)), &opts).unwrap();
            checks.that(&format!("T shift {c} ({mode:?}): {t} vs {t0}"), t == t0);
        }
    }

    // closed-form exponential-ratio MLEs against the optimizer
    let exp = exp_ratio_model();
    let mut worst_mle = 0.0f64;
    for d in exp_datasets(200, 8) {
        let closed = fit_full(&exp, &d).unwrap().estimate;
        let newton = mle(&exp, &d, ParamPoint::new(1.0, 1.0)).unwrap().estimate;
        let diff = (closed.psi - newton.psi).abs().max((closed.lambda - newton.lambda).abs());
        worst_mle = worst_mle.max(diff);
    }
    checks.that(&format!("closed-form MLE vs Newton {worst_mle:e}"), worst_mle < 1e-9);

    // Simpson: error ratio ~16 per halving
    let exact = 2.0;
    let e1 = (simpson(f64::sin, 0.0, std::f64::consts::PI, 16).unwrap() - exact).abs();
    let e2 = (simpson(f64::sin, 0.0, std::f64::consts::PI, 32).unwrap() - exact).abs();
    checks.that(&format!("Simpson convergence ratio {:.2}", e1 / e2), e1 / e2 > 15.0 && e1 / e2 < 17.0);

    // adaptive ODE solution against brute-force RK4
    let f = |s: f64, y: f64| -2.0 * s * y + s.sin();
    let mut y = 1.0;
    let steps = 1_000_000;
    let h = 3.0 / steps as f64;
    for i in 0..steps {
        let s = h * i as f64;
        let k1 = f(s, y);
        let k2 = f(s + 0.5 * h, y + 0.5 * h * k1);
        let k3 = f(s + 0.5 * h, y + 0.5 * h * k2);
        let k4 = f(s + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let adaptive = integrate_ode(f, 0.0, 1.0, 3.0, 1e-10, 1e-12).unwrap().end().1;
    checks.that(&format!("ODE vs RK4 {:.1e}", (adaptive - y).abs()), (adaptive - y).abs() < 1e-8);

    // reports identical for any worker count
    let mut cfg = SimConfig::logistic(200, DEFAULT_SEED);
    let mut reports = Vec::new();
    for k in [1, 2, 4] {
        cfg.threads = Some(k);
        reports.push(run_type1(&cfg).unwrap().methods);
    }
    checks.that("SimReport independent of threads", reports.windows(2).all(|w| w[0] == w[1]));

    // evaluate is a pure function of its inputs
    let prior = Prior::Matching(InitialCondition::constant(-1.0));
    let a = evaluate(m.as_ref(), &d, 0.5, &prior, &TraceOptions::default()).unwrap();
    let b = evaluate(m.as_ref(), &d, 0.5, &prior, &TraceOptions::default()).unwrap();
    checks.that("repeat evaluation identical", a == b);

    checks.outcome("structural invariants".into())
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 7] = [
        ("1", "orthogonal oracle equivalence", criterion_1),
        ("2", "exponential-ratio type I error table", criterion_2),
        ("3", "logistic type I error table", criterion_3),
        ("4", "credible-interval coverage", criterion_4),
        ("5", "real-data reproduction (data-gated)", criterion_5),
        ("6", "PDE residual", criterion_6),
        ("7", "structural invariants", criterion_7),
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, title, run) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {id}: {title} [{secs:.1}s] {detail}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
