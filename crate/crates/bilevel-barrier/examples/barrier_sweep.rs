//! Halves the barrier parameter and watches the smoothing bias vanish: the
//! gap between the barrier hyperfunction and the true hyperfunction (from the
//! brute-force oracle) shrinks roughly linearly in t, and on the strongly
//! convex toy QP it stays under the a priori bound L_f * sqrt(2 k t / mu_g).

use bilevel_barrier::barrier::BarrierContext;
use bilevel_barrier::lower::solve_lower;
use bilevel_barrier::testbed::{brute_force_hyperfunction, toy_qp_problem};

fn main() {
    let prob = toy_qp_problem();
    let x = vec![0.9];
    let phi = brute_force_hyperfunction(&prob, &x, 0).unwrap();
    let c = &prob.constants;

    println!("true hyperfunction value at x = {:?}: {:.8}", x, phi);
    println!("{:>9} {:>12} {:>12}", "t", "gap", "bound");
    let mut t = 0.1;
    let mut warm = None;
    let mut last_gap = f64::INFINITY;
    for _ in 0..5 {
        let ctx = BarrierContext::new(&prob, t).unwrap();
        let sol = solve_lower(&ctx, &x, 1e-8, warm.as_deref()).unwrap();
        let gap = ((prob.f)(&x, &sol.y_tilde) - phi).abs();
        let bound = c.l_f * (2.0 * c.k as f64 * t / c.mu_g).sqrt();
        println!("{:>9} {:>12.6e} {:>12.6e}", t, gap, bound);
        assert!(gap <= bound + c.l_f * 1e-8, "value bound violated at t={t}");
        assert!(gap <= last_gap * 1.001, "gap failed to shrink at t={t}");
        last_gap = gap;
        warm = Some(sol.y_tilde);
        t /= 2.0;
    }
}
