//! Runs the outer projected-gradient loop on the toy QP at a fixed barrier
//! parameter and prints the per-iteration trace.
//!
//! The stepsizes come from certified worst-case constants, so they are
//! extremely conservative; the projected-gradient residual is still an honest
//! stationarity certificate at every iterate.

use bilevel_barrier::barrier::BarrierContext;
use bilevel_barrier::outer::run_bfbm;
use bilevel_barrier::testbed::toy_qp_problem;

fn main() {
    let prob = toy_qp_problem();
    let ctx = BarrierContext::new(&prob, 0.05).unwrap();
    let result = run_bfbm(&ctx, &[1.0], 1e-3, 50, 0);

    println!("{:>3} {:>10} {:>12} {:>12} {:>12} {:>8}", "s", "eta", "grad_norm", "stat", "phi", "inner");
    for row in &result.trace.rows {
        println!(
            "{:>3} {:>10.3e} {:>12.6} {:>12.3e} {:>12.6} {:>8}",
            row.s, row.eta_s, row.grad_norm, row.stationarity, row.phi_tilde, row.inner_iters
        );
    }
    println!(
        "status {:?}, best stationarity {:.3e} at x = {:?}",
        result.status, result.best_stationarity, result.x_out
    );
}
