//! End-to-end acceptance gate: every numbered criterion runs in sequence and
//! prints one PASS/FAIL line with its wall time. Durations are informational;
//! only the numerical checks gate the result.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use bilevel_barrier::barrier::BarrierContext;
use bilevel_barrier::hypergrad::{approx_hypergradient, fd_hyperfunction_grad};
use bilevel_barrier::linalg;
use bilevel_barrier::lower::solve_lower;
use bilevel_barrier::outer::run_bfbm;
use bilevel_barrier::path::run_pathfollow;
use bilevel_barrier::problem::eval_constraints;
use bilevel_barrier::testbed::{
    brute_force_hyperfunction, brute_force_lower, by_name, example1_closed_form,
    example1_problem, svm_problem, toy_qp_problem, BruteForceMode,
};
use bilevel_barrier::outer::OuterOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type CheckResult = Result<(), String>;

const ALL_PROBLEMS: [&str; 5] = ["example1", "example1_ball", "toy_qp", "price_setting", "svm"];

fn oracle_mode(name: &str) -> BruteForceMode {
    match name {
        "example1" | "example1_ball" | "price_setting" => BruteForceMode::Vertex,
        _ => BruteForceMode::ActiveSet,
    }
}

fn sample_x(prob: &bilevel_barrier::problem::BilevelProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match &prob.upper_set {
        bilevel_barrier::problem::UpperSet::Box { lower, upper } => lower
            .iter()
            .zip(upper)
            .map(|(a, b)| a + rng.gen_range(0.1..0.9) * (b - a))
            .collect(),
        bilevel_barrier::problem::UpperSet::Ball { center, .. } => center.clone(),
    }
}

fn criterion_closed_form() -> CheckResult {
    let prob = example1_problem();
    for (x, t) in [(1.0, 0.1), (-1.0, 0.1), (0.5, 0.05), (-0.5, 0.05), (0.0, 0.3)] {
        let started = Instant::now();
        let ctx = BarrierContext::new(&prob, t).map_err(|e| e.to_string())?;
        let sol = solve_lower(&ctx, &[x], 1e-8, None).map_err(|e| e.to_string())?;
        let (y1, y2, _) = example1_closed_form(t, x);
        let err = (sol.y_tilde[0] - y1).abs().max((sol.y_tilde[1] - y2).abs());
        if err > 1e-6 {
            return Err(format!("(x={x}, t={t}): error {err:.2e} > 1e-6"));
        }
        let secs = started.elapsed().as_secs_f64();
        if secs > 1.0 {
            eprintln!("  note: (x={x}, t={t}) took {secs:.2}s, over the 1s goal");
        }
    }
    Ok(())
}

fn criterion_margin() -> CheckResult {
    for name in ALL_PROBLEMS {
        let prob = by_name(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..50 {
            let x = sample_x(&prob, &mut rng);
            let t = prob.constants.t_max * rng.gen_range(0.35..1.0);
            let ctx = BarrierContext::new(&prob, t).map_err(|e| e.to_string())?;
            let sol = solve_lower(&ctx, &x, 1e-2, None).map_err(|e| e.to_string())?;
            let h = eval_constraints(&prob, &x, &sol.y_tilde).map_err(|e| e.to_string())?;
            for (j, hj) in h.iter().enumerate() {
                if *hj > -sol.m_s + 1e-9 {
                    return Err(format!(
                        "{name} sample {i}: h[{j}] = {hj:.3e} above -m_s = {:.3e}",
                        -sol.m_s
                    ));
                }
            }
        }
    }
    Ok(())
}

fn criterion_optimality_gap() -> CheckResult {
    let eps_s = 1e-3;
    for name in ALL_PROBLEMS {
        let prob = by_name(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..20 {
            let x = sample_x(&prob, &mut rng);
            let t = prob.constants.t_max * rng.gen_range(0.35..1.0);
            let ctx = BarrierContext::new(&prob, t).map_err(|e| e.to_string())?;
            let sol = solve_lower(&ctx, &x, eps_s, None).map_err(|e| e.to_string())?;
            let cert = brute_force_lower(&prob, &x, oracle_mode(name)).map_err(|e| e.to_string())?;
            let gap = (prob.g)(&x, &sol.y_tilde) - cert.g_value;
            let bound = prob.k() as f64 * t + 10.0 * eps_s * prob.constants.l_g;
            if gap > bound {
                return Err(format!("{name} sample {i}: gap {gap:.4e} > bound {bound:.4e}"));
            }
        }
    }
    Ok(())
}

fn criterion_value_bound() -> CheckResult {
    for (prob, eps_s) in [(toy_qp_problem(), 1e-6), (svm_problem(2, 2, 2, 11), 1e-5)] {
        let c = prob.constants;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..10 {
            let x = sample_x(&prob, &mut rng);
            let phi = brute_force_hyperfunction(&prob, &x, 4).map_err(|e| e.to_string())?;
            let mut warm = None;
            for t in [0.1, 0.05, 0.025, 0.0125] {
                let ctx = BarrierContext::new(&prob, t).map_err(|e| e.to_string())?;
                let sol = solve_lower(&ctx, &x, eps_s, warm.take().as_deref())
                    .map_err(|e| e.to_string())?;
                let gap = ((prob.f)(&x, &sol.y_tilde) - phi).abs();
                let bound = c.l_f * (2.0 * c.k as f64 * t / c.mu_g).sqrt() + c.l_f * eps_s;
                if gap > bound {
                    return Err(format!(
                        "{} point {i}, t={t}: gap {gap:.4e} > bound {bound:.4e}",
                        prob.name
                    ));
                }
                warm = Some(sol.y_tilde);
            }
        }
    }
    Ok(())
}

fn criterion_hypergradient_fd() -> CheckResult {
    let step = 1e-4;
    for name in ["example1", "toy_qp", "price_setting", "svm"] {
        let prob = by_name(name).unwrap();
        let t = prob.constants.t_max;
        let ctx = BarrierContext::new(&prob, t).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..10 {
            // Pull probes toward the box center so the stencil stays inside.
            let mut x = sample_x(&prob, &mut rng);
            if let bilevel_barrier::problem::UpperSet::Box { lower, upper } = &prob.upper_set {
                for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
                    let mid = 0.5 * (lo + hi);
                    *xi = mid + 0.8 * (*xi - mid);
                }
            }
            let sol = solve_lower(&ctx, &x, 1e-10, None).map_err(|e| e.to_string())?;
            let hg = approx_hypergradient(&ctx, &x, &sol).map_err(|e| e.to_string())?;
            let fd = fd_hyperfunction_grad(&ctx, &x, step, step.powi(3))
                .map_err(|e| e.to_string())?;
            let gap = linalg::dist(&hg.grad, &fd);
            let tol = hg.error_bound + 100.0 * step * step * (1.0 + linalg::norm(&fd));
            if gap > tol {
                return Err(format!("{name} point {i}: gap {gap:.4e} > {tol:.4e}"));
            }
        }
    }
    Ok(())
}

fn multiplier_gaps(
    prob: &bilevel_barrier::problem::BilevelProblem,
    x: &[f64],
    ts: &[f64],
) -> Result<Vec<f64>, String> {
    let cert = brute_force_lower(prob, x, oracle_mode(&prob.name)).map_err(|e| e.to_string())?;
    let mut gaps = Vec::new();
    let mut warm = None;
    for &t in ts {
        let ctx = BarrierContext::new(prob, t).map_err(|e| e.to_string())?;
        let sol = solve_lower(&ctx, x, 1e-7, warm.take().as_deref()).map_err(|e| e.to_string())?;
        let h = eval_constraints(prob, x, &sol.y_tilde).map_err(|e| e.to_string())?;
        let worst = (0..prob.k())
            .map(|i| (t / (-h[i]) - cert.lambdas[i]).abs())
            .fold(0.0f64, f64::max);
        gaps.push(worst);
        warm = Some(sol.y_tilde);
    }
    Ok(gaps)
}

fn criterion_multiplier_convergence() -> CheckResult {
    let ts = [0.1, 0.05, 0.025, 0.0125];
    // example1 at x = 0.5 plus a toy_qp variant with the sum constraint
    // active (x < 0, reachable by direct lower-level calls only).
    for (prob, x) in [(example1_problem(), vec![0.5]), (toy_qp_problem(), vec![-0.5])] {
        let gaps = multiplier_gaps(&prob, &x, &ts)?;
        for w in gaps.windows(2) {
            if w[1] > 1.1 * w[0] {
                return Err(format!("{}: gaps {gaps:?} not nonincreasing", prob.name));
            }
        }
        let last = *gaps.last().unwrap();
        if last >= 0.05 {
            return Err(format!("{}: final gap {last:.4} >= 0.05", prob.name));
        }
    }
    Ok(())
}

fn criterion_hypergradient_convergence() -> CheckResult {
    // At x = 0.5 the original lower solution sits at a vertex with strictly
    // positive multipliers on its active constraints, so the hyperfunction is
    // differentiable there and the barrier hypergradient must approach its
    // gradient as t shrinks.
    let prob = example1_problem();
    let x = vec![0.5];
    let fd_step = 1e-5;
    let phi = |xq: f64| brute_force_hyperfunction(&prob, &[xq], 7).map_err(|e| e.to_string());
    let grad_phi = (phi(x[0] + fd_step)? - phi(x[0] - fd_step)?) / (2.0 * fd_step);
    let mut discrepancies = Vec::new();
    let mut warm = None;
    for t in [0.1, 0.05, 0.025, 0.0125] {
        let ctx = BarrierContext::new(&prob, t).map_err(|e| e.to_string())?;
        let sol = solve_lower(&ctx, &x, 1e-9, warm.take().as_deref()).map_err(|e| e.to_string())?;
        let hg = approx_hypergradient(&ctx, &x, &sol).map_err(|e| e.to_string())?;
        discrepancies.push((hg.grad[0] - grad_phi).abs());
        warm = Some(sol.y_tilde);
    }
    for w in discrepancies.windows(2) {
        if w[1] > 1.1 * w[0] {
            return Err(format!("discrepancies {discrepancies:?} not shrinking"));
        }
    }
    Ok(())
}

fn criterion_outer_contract() -> CheckResult {
    let prob = toy_qp_problem();
    let ctx = BarrierContext::new(&prob, 0.01).map_err(|e| e.to_string())?;
    let result = run_bfbm(&ctx, &[0.85], 1e-3, 5000, 0);
    if result.best_stationarity > 1e-3 {
        return Err(format!("best stationarity {:.3e} > 1e-3", result.best_stationarity));
    }
    let rows = &result.trace.rows;
    for w in rows.windows(2) {
        // Near-descent: phi decreases by at least eta/2 * stationarity^2 up
        // to the certified gradient error and 1e-8 slack.
        let (a, b) = (&w[0], &w[1]);
        let allowed = a.phi_tilde - 0.5 * a.eta_s * a.stationarity * a.stationarity
            + 0.5 * a.eta_s * a.grad_norm * 1e-3
            + 1e-8;
        if b.phi_tilde > allowed {
            return Err(format!("step {}: phi {} above near-descent bound {allowed}", a.s, b.phi_tilde));
        }
    }
    for row in rows {
        // The localization branch of the stepsize rule caps every move.
        if row.eta_s * row.grad_norm > row.d_s / (2.0 * prob.constants.l_h) + 1e-15 {
            return Err(format!("step {} leaves the localization radius", row.s));
        }
    }
    Ok(())
}

fn criterion_path_following() -> CheckResult {
    let prob = toy_qp_problem();
    let trace = run_pathfollow(&prob, &[0.85], 0.1, 1e-2, 4, 200, 0, OuterOptions::default())
        .map_err(|e| e.to_string())?;
    if trace.rounds.len() != 4 {
        return Err(format!("{} rounds recorded, expected 4", trace.rounds.len()));
    }
    for (i, round) in trace.rounds.iter().enumerate() {
        let (t_want, eps_want) = (0.1 / 2f64.powi(i as i32), 1e-2 / 2f64.powi(i as i32));
        if round.t_i != t_want || round.eps_i != eps_want {
            return Err(format!(
                "round {i}: (t, eps) = ({}, {}) != exact halving ({t_want}, {eps_want})",
                round.t_i, round.eps_i
            ));
        }
    }
    let last = trace.rounds.last().unwrap();
    if last.result.best_stationarity > last.eps_i {
        return Err(format!(
            "final stationarity {:.3e} > eps_final {:.3e}",
            last.result.best_stationarity, last.eps_i
        ));
    }
    Ok(())
}

fn strip_wall_ms(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rsplit_once(',') {
            Some((head, _)) => head.to_string(),
            None => line.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_determinism() -> CheckResult {
    let bin = env!("CARGO_BIN_EXE_bilevel-barrier");
    let run = |args: &[&str]| -> Result<String, String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        String::from_utf8(out.stdout).map_err(|e| e.to_string())
    };
    let solve_args =
        ["solve", "--problem", "toy_qp", "--t", "0.05", "--eps", "1e-3", "--max-outer", "3", "--seed", "7"];
    let a = strip_wall_ms(&run(&solve_args)?);
    let b = strip_wall_ms(&run(&solve_args)?);
    if a != b {
        return Err("solve trace bodies differ between reruns".into());
    }
    let sweep_args =
        ["sweep-t", "--problem", "example1", "--t0", "0.1", "--rounds", "3", "--seed", "7"];
    if run(&sweep_args)? != run(&sweep_args)? {
        return Err("sweep-t output differs between reruns".into());
    }
    let path_args = ["pathfollow", "--problem", "toy_qp", "--t0", "0.1", "--eps0", "1e-2",
        "--rounds", "2", "--max-outer", "20", "--seed", "7"];
    if run(&path_args)? != run(&path_args)? {
        return Err("pathfollow round summaries differ between reruns".into());
    }
    Ok(())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> CheckResult); 10] = [
        ("closed-form lower solutions", criterion_closed_form),
        ("boundary margin", criterion_margin),
        ("optimality gap", criterion_optimality_gap),
        ("strongly convex value bound", criterion_value_bound),
        ("hypergradient vs FD oracle", criterion_hypergradient_fd),
        ("multiplier convergence", criterion_multiplier_convergence),
        ("hypergradient convergence", criterion_hypergradient_convergence),
        ("outer-loop contract", criterion_outer_contract),
        ("path-following schedule", criterion_path_following),
        ("seeded determinism", criterion_determinism),
    ];
    let mut failures = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("criterion {:2} {name}: PASS ({secs:.1}s)", i + 1),
            Err(why) => {
                println!("criterion {:2} {name}: FAIL ({secs:.1}s) - {why}", i + 1);
                failures.push(format!("{}: {why}", name));
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:#?}");
}
