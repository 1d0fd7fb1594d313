//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the report prints in a fixed
//! order. The process exits non-zero when any hard criterion fails; soft
//! criteria are reported but never change the exit status.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use slm_core::checks::{run_suite, CheckOptions, Suite, SuiteReport};
use slm_core::experiment::{run_experiment, ExperimentConfig};
use slm_core::linalg::{pseudoinverse_solve, default_rank_tol, Matrix};
use slm_core::rbf::{generate_bank, seeded_rng, RandomSpec};
use slm_core::training::{build_k_matrix, build_k_matrix_naive, fit_slm, Dataset, FitOptions};
use slm_core::vanderpol::{generate_phase_data, vdp_step, VdpConfig};
use slm_core::ModelKind;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    soft: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn hard(id: &'static str, title: &'static str, pass: bool, summary: String) -> Self {
        Outcome {
            id,
            title,
            pass,
            soft: false,
            summary,
            details: Vec::new(),
        }
    }
}

fn suite_outcome(id: &'static str, title: &'static str, r: &SuiteReport, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    let in_budget = budget.is_none_or(|b| elapsed <= b);
    let mut o = Outcome::hard(
        id,
        title,
        r.passed() && in_budget,
        format!("{} in {:.2?}{}", r.summary(), elapsed, budget.map(|b| format!(" (budget {b:?})")).unwrap_or_default()),
    );
    o.details = r
        .cases
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("seed {}: {}", c.seed, c.detail))
        .collect();
    o
}

fn timed_suite(suite: Suite, seeds: usize) -> (SuiteReport, Duration) {
    let opts = CheckOptions {
        seeds: Some(seeds),
        ..CheckOptions::default()
    };
    let start = Instant::now();
    let r = run_suite(suite, &opts).expect("suite runs");
    (r, start.elapsed())
}

fn exact_interpolation() -> Outcome {
    // N in {6, 12, 30}, n in {1, 2}, h = N/(n+1), 50 instances, 48 must pass
    let (r, t) = timed_suite(Suite::Interpolation, 50);
    assert_eq!(r.required, 48);
    suite_outcome("1", "exact interpolation with h = N/(n+1)", &r, t, None)
}

fn full_rank() -> Outcome {
    let (r, t) = timed_suite(Suite::Rank, 100);
    suite_outcome("2", "K has rank min(N, (n+1)h)", &r, t, None)
}

fn distinct_norms() -> Outcome {
    let (r, t) = timed_suite(Suite::DistinctNorms, 1000);
    suite_outcome("3", "random center sees distinct distances", &r, t, Some(Duration::from_secs(1)))
}

fn tsm_equivalence() -> Outcome {
    let (r, t) = timed_suite(Suite::Equivalence, 1000);
    suite_outcome("4", "product-form fuzzy rules equal the SLM", &r, t, Some(Duration::from_secs(1)))
}

fn elm_reduction() -> Outcome {
    let (r, t) = timed_suite(Suite::ElmReduction, 20);
    suite_outcome("5", "zero-slope SLM equals ELM", &r, t, None)
}

fn normal(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)).unwrap()
}

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = norm(&v);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn pinv(a: &Matrix) -> Matrix {
    pseudoinverse_solve(a, &Matrix::identity(a.rows()), default_rank_tol(a.rows(), a.cols())).unwrap()
}

fn residual_sq(a: &Matrix, x: &[f64], t: &[f64]) -> f64 {
    (0..a.rows()).map(|r| (dot(a.row(r), x) - t[r]).powi(2)).sum()
}

fn pseudoinverse_contract() -> Outcome {
    let mut rng = seeded_rng(6, 0);
    let mut details = Vec::new();

    // Penrose conditions, full-rank and rank-deficient 5 x 3 matrices
    let mut worst_penrose = 0.0f64;
    for k in 0..40 {
        let a = if k % 2 == 0 {
            normal(&mut rng, 5, 3)
        } else {
            normal(&mut rng, 5, 2).matmul(&normal(&mut rng, 2, 3)).unwrap()
        };
        let x = pinv(&a);
        let ax = a.matmul(&x).unwrap();
        let xa = x.matmul(&a).unwrap();
        let conds = [
            max_abs_diff(&ax.matmul(&a).unwrap(), &a),
            max_abs_diff(&xa.matmul(&x).unwrap(), &x),
            max_abs_diff(&ax, &ax.transpose()),
            max_abs_diff(&xa, &xa.transpose()),
        ];
        worst_penrose = conds.into_iter().fold(worst_penrose, f64::max);
    }
    let penrose_ok = worst_penrose <= 1e-8;
    if !penrose_ok {
        details.push(format!("Penrose deviation {worst_penrose:.3e}"));
    }

    // Minimum norm over the null space, brute force on a 10^4-point grid
    let mut worst_gap = f64::NEG_INFINITY;
    for k in 0..20 {
        let t: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
        let tm = Matrix::new(5, 1, t.clone()).unwrap();
        let (a, basis): (Matrix, Vec<[f64; 3]>) = if k % 2 == 0 {
            // rank 2: the null space is spanned by the cross product of the row factor
            let c = normal(&mut rng, 2, 3);
            let a = normal(&mut rng, 5, 2).matmul(&c).unwrap();
            (a, vec![unit(cross(c.row(0), c.row(1)))])
        } else {
            // rank 1: the null space is the plane orthogonal to the row factor
            let c = normal(&mut rng, 1, 3);
            let a = normal(&mut rng, 5, 1).matmul(&c).unwrap();
            let c = c.row(0);
            let helper = if c[0].abs() < 0.5 * norm(c) { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let u = unit(cross(c, &helper));
            let w = unit(cross(c, &u));
            (a, vec![u, w])
        };
        let xs = pseudoinverse_solve(&a, &tm, default_rank_tol(5, 3)).unwrap().into_vec();
        let best_res = residual_sq(&a, &xs, &t);
        let radius = norm(&xs) + 1.0;
        let mut grid_min = f64::INFINITY;
        let mut res_drift = 0.0f64;
        let mut visit = |cand: [f64; 3]| {
            grid_min = grid_min.min(norm(&cand));
            res_drift = res_drift.max((residual_sq(&a, &cand, &t) - best_res).abs());
        };
        if basis.len() == 1 {
            for i in 0..10_000 {
                let s = radius * (2.0 * i as f64 / 9_999.0 - 1.0);
                visit([0, 1, 2].map(|d| xs[d] + s * basis[0][d]));
            }
        } else {
            for i in 0..100 {
                for j in 0..100 {
                    let s = radius * (2.0 * i as f64 / 99.0 - 1.0);
                    let r = radius * (2.0 * j as f64 / 99.0 - 1.0);
                    visit([0, 1, 2].map(|d| xs[d] + s * basis[0][d] + r * basis[1][d]));
                }
            }
        }
        let gap = norm(&xs) - grid_min;
        worst_gap = worst_gap.max(gap);
        if gap > 1e-9 || res_drift > 1e-9 * (1.0 + best_res) {
            details.push(format!(
                "instance {k}: |x+| - min grid norm = {gap:.3e}, residual drift {res_drift:.3e}"
            ));
        }
    }
    let mut o = Outcome::hard(
        "6",
        "pseudoinverse contract",
        penrose_ok && worst_gap <= 1e-9 && details.is_empty(),
        format!("Penrose max deviation {worst_penrose:.3e} (tol 1e-8); min-norm gap {worst_gap:.3e} (tol 1e-9)"),
    );
    o.details = details;
    o
}

struct Reference {
    train: f64,
    gen: f64,
    sim: f64,
}

fn reference(kind: ModelKind) -> Reference {
    match kind {
        ModelKind::Slm => Reference {
            train: 2.3872e-11,
            gen: 2.2645e-10,
            sim: 7.6113e-5,
        },
        ModelKind::Elm => Reference {
            train: 1.3108e-11,
            gen: 3.1529e-9,
            sim: 7.5266e-5,
        },
    }
}

fn within_orders(value: f64, target: f64, orders: f64) -> bool {
    value > 0.0 && (value / target).log10().abs() <= orders
}

fn van_der_pol(report: &slm_core::ExperimentReport, elapsed: Duration) -> Outcome {
    let mut pass = elapsed <= Duration::from_secs(600);
    let mut details = Vec::new();
    let mut parts = Vec::new();
    for kind in [ModelKind::Slm, ModelKind::Elm] {
        let s = report.summary(kind).expect("both kinds run");
        let r = reference(kind);
        let checks = [
            ("train", s.mse_train.mean, 1e-8, r.train),
            ("gen", s.mse_gen.mean, 1e-6, r.gen),
            ("sim", s.mse_sim.mean, 1e-2, r.sim),
        ];
        for (name, value, bound, target) in checks {
            let ok_bound = value <= bound;
            let ok_ref = within_orders(value, target, 3.0);
            pass &= ok_bound && ok_ref;
            parts.push(format!("{} {name} {value:.2e}", kind.label()));
            if !ok_bound || !ok_ref {
                details.push(format!(
                    "{} {name}: mean {value:.3e}, bound {bound:.0e} {}, reference {target:.3e} ({:+.1} orders) {}",
                    kind.label(),
                    if ok_bound { "ok" } else { "exceeded" },
                    (value / target).log10(),
                    if ok_ref { "ok" } else { "outside 3 orders" }
                ));
            }
        }
        if s.failures > 0 {
            pass = false;
            details.push(format!("{} failed repetitions: {}", kind.label(), s.failures));
        }
    }
    let mut o = Outcome::hard(
        "7",
        "Van der Pol errors, 10 repetitions",
        pass,
        format!("{} in {:.1?}", parts.join(", "), elapsed),
    );
    o.details = details;
    o
}

fn timing_direction(report: &slm_core::ExperimentReport) -> Outcome {
    let slm = report.summary(ModelKind::Slm).unwrap();
    let elm = report.summary(ModelKind::Elm).unwrap();
    let mut o = Outcome::hard(
        "8",
        "SLM total time below ELM total time",
        slm.total_seconds.count >= 10 && slm.total_seconds.mean < elm.total_seconds.mean,
        format!(
            "SLM {:.3} s vs ELM {:.3} s mean over {} repetitions (solve {:.3} s vs {:.3} s)",
            slm.total_seconds.mean,
            elm.total_seconds.mean,
            slm.total_seconds.count,
            slm.pinv_seconds.mean,
            elm.pinv_seconds.mean
        ),
    );
    o.details.push(format!(
        "assembly + solve + evaluation per repetition; free parameters SLM {} / ELM {}",
        slm.param_count, elm.param_count
    ));
    o
}

fn best_of(runs: usize, mut f: impl FnMut()) -> f64 {
    (0..runs)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn block_assembly() -> Outcome {
    let data = generate_phase_data(&VdpConfig::default()).unwrap();
    let learning = data.learning();
    let bank = generate_bank(&RandomSpec::default(), 2, 100).unwrap();
    assert_eq!(
        build_k_matrix(&bank, learning).unwrap(),
        build_k_matrix_naive(&bank, learning).unwrap()
    );
    let block = best_of(5, || {
        std::hint::black_box(build_k_matrix(&bank, learning).unwrap());
    });
    let naive = best_of(5, || {
        std::hint::black_box(build_k_matrix_naive(&bank, learning).unwrap());
    });
    let speedup = naive / block;
    Outcome {
        id: "8b",
        title: "block-wise K assembly vs naive",
        pass: speedup >= 1.2,
        soft: true,
        summary: format!(
            "{:.1} ms vs {:.1} ms on {}x{} ({speedup:.2}x, want >= 1.2x)",
            block * 1e3,
            naive * 1e3,
            learning.len(),
            3 * bank.count_models()
        ),
        details: Vec::new(),
    }
}

fn monotone_capacity() -> Outcome {
    let mut rng = seeded_rng(9, 1);
    let inputs = Matrix::from_fn(500, 2, |_, _| rng.random_range(-2.5..2.5)).unwrap();
    let targets = Matrix::from_fn(500, 2, |j, c| vdp_step([inputs.get(j, 0), inputs.get(j, 1)], 1.0, 0.01)[c]).unwrap();
    let data = Dataset::new(inputs, targets).unwrap();
    let full = generate_bank(&RandomSpec::default().with_seed(9), 2, 64).unwrap();
    let mut errors = Vec::new();
    for h in [1, 2, 4, 8, 16, 32, 64] {
        let (_, rep) = fit_slm(&full.prefix(h).unwrap(), &data, &FitOptions::default()).unwrap();
        errors.push((h, rep.train_mse));
    }
    let violations: Vec<String> = errors
        .windows(2)
        .filter(|w| w[1].1 > w[0].1 + 1e-9)
        .map(|w| format!("h={} -> {}: {:.3e} -> {:.3e}", w[0].0, w[1].0, w[0].1, w[1].1))
        .collect();
    let mut o = Outcome::hard(
        "9",
        "training error non-increasing in nested h",
        violations.is_empty(),
        errors.iter().map(|(h, e)| format!("h={h}:{e:.1e}")).collect::<Vec<_>>().join(" "),
    );
    o.details = violations;
    o
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.contains("seconds"));
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn quick_bench(dir: &Path) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_slm"))
        .args(["bench", "--quick", "--out"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let text = std::fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    strip_timing(&mut v);
    Ok(v)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let a = quick_bench(&tmp.path().join("a"));
    let b = quick_bench(&tmp.path().join("b"));
    let elapsed = start.elapsed();
    match (a, b) {
        (Ok(a), Ok(b)) => {
            let (sa, sb) = (serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            Outcome::hard(
                "10",
                "bench --quick is deterministic",
                sa == sb,
                format!("{} bytes each after removing timing fields, two runs in {elapsed:.1?}", sa.len()),
            )
        }
        (a, b) => Outcome::hard(
            "10",
            "bench --quick is deterministic",
            false,
            format!("bench failed: {:?} / {:?}", a.err(), b.err()),
        ),
    }
}

fn print(o: &Outcome) {
    let tag = match (o.pass, o.soft) {
        (true, _) => "PASS",
        (false, false) => "FAIL",
        (false, true) => "WARN",
    };
    println!("criterion {:<3} {tag}  {}: {}", o.id, o.title, o.summary);
    for d in &o.details {
        println!("              {d}");
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are harness conventions; accept and ignore them.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut outcomes = Vec::new();
    let mut run = |o: Outcome| {
        print(&o);
        outcomes.push(o);
    };
    run(exact_interpolation());
    run(full_rank());
    run(distinct_norms());
    run(tsm_equivalence());
    run(elm_reduction());
    run(pseudoinverse_contract());

    let cfg = ExperimentConfig {
        repetitions: 10,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let report = run_experiment(&cfg).expect("experiment runs");
    let elapsed = start.elapsed();
    run(van_der_pol(&report, elapsed));
    run(timing_direction(&report));
    run(block_assembly());
    run(monotone_capacity());
    run(determinism());

    let hard: Vec<&Outcome> = outcomes.iter().filter(|o| !o.soft).collect();
    let failed: Vec<&str> = hard.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} hard criteria passed{}",
        hard.len() - failed.len(),
        hard.len(),
        if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
