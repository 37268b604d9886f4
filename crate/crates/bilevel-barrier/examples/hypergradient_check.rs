//! Cross-checks the implicit hypergradient against central finite differences
//! of the barrier hyperfunction on two built-in problems. The implicit form
//! needs one lower solve plus one symmetric linear solve; the stencil needs
//! 2n lower solves at much higher accuracy.

use bilevel_barrier::barrier::BarrierContext;
use bilevel_barrier::hypergrad::{approx_hypergradient, fd_hyperfunction_grad};
use bilevel_barrier::linalg;
use bilevel_barrier::lower::solve_lower;
use bilevel_barrier::testbed::{example1_problem, toy_qp_problem};

fn main() {
    let step = 1e-4;
    for (prob, x, t) in [
        (example1_problem(), vec![0.5], 0.1),
        (toy_qp_problem(), vec![0.8], 0.05),
    ] {
        let ctx = BarrierContext::new(&prob, t).unwrap();
        let sol = solve_lower(&ctx, &x, 1e-10, None).unwrap();
        let hg = approx_hypergradient(&ctx, &x, &sol).unwrap();
        // Inner accuracy slaved to step^3 keeps solver noise below the
        // O(step^2) truncation error of the stencil.
        let fd = fd_hyperfunction_grad(&ctx, &x, step, step.powi(3)).unwrap();
        let gap = linalg::dist(&hg.grad, &fd);
        println!("{}: implicit {:?}", prob.name, hg.grad);
        println!("{}: stencil  {:?}", prob.name, fd);
        println!(
            "{}: gap {:.3e}, certified error bound {:.3e} + O(step^2)",
            prob.name, gap, hg.error_bound
        );
        assert!(gap <= hg.error_bound + 100.0 * step * step * (1.0 + linalg::norm(&fd)));
    }
}
