//! A linear lower level can have an unbounded or degenerate solution set.
//! Appending the norm-ball constraint ||y||^2 <= R^2 restores a bounded
//! domain and, with the barrier, a strongly convex smoothed problem. This
//! example augments the bilinear toy problem and inspects the positioning
//! constant tau that drives the linear-setting value bound.

use bilevel_barrier::barrier::BarrierContext;
use bilevel_barrier::lower::solve_lower;
use bilevel_barrier::problem::{augment_with_norm_ball, BallRule};
use bilevel_barrier::testbed::{estimate_tau, example1_problem};

fn main() {
    let base = example1_problem();
    let prob = augment_with_norm_ball(&base, BallRule::Conservative);
    println!("augmented problem: {} ({} constraints)", prob.name, prob.k());

    // tau at x = 1: the optimal vertex of the augmented polytope sees the
    // objective gradient at a 45 degree angle to its best edge.
    let tau = estimate_tau(&prob, &[1.0]).unwrap();
    println!("positioning constant tau(1) = {tau:.6} (exact: 1/sqrt(2) = {:.6})", 0.5f64.sqrt());

    for t in [0.1, 0.05] {
        let ctx = BarrierContext::new(&prob, t).unwrap();
        let sol = solve_lower(&ctx, &[1.0], 1e-8, None).unwrap();
        println!(
            "t = {t}: y_tilde = [{:.6}, {:.6}], strong convexity mu = {:.3e}",
            sol.y_tilde[0], sol.y_tilde[1], sol.mu
        );
    }
}
