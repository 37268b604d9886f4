use approx::assert_abs_diff_eq;
use bilevel_barrier::barrier::BarrierContext;
use bilevel_barrier::hypergrad::{
    approx_hypergradient, fd_hyperfunction_grad, hypergradient_error_bound,
};
use bilevel_barrier::linalg;
use bilevel_barrier::lower::solve_lower;
use bilevel_barrier::testbed::{example1_problem, toy_qp_problem};
use bilevel_barrier::Error;

// Closed form on example1: phi_tilde(x) = y1(x) = (t - sqrt(t^2 + x^2)) / x,
// so d/dx phi_tilde = (t - sqrt(t^2+x^2))/x^2 + ... evaluated numerically
// from the formula below.
fn example1_phi_grad(t: f64, x: f64) -> f64 {
    let s = (t * t + x * x).sqrt();
    // d/dx [(t - s)/x] = (-x/s * x - (t - s)) / x^2
    (-x * x / s - (t - s)) / (x * x)
}

#[test]
fn implicit_gradient_matches_closed_form() {
    let prob = example1_problem();
    let ctx = BarrierContext::new(&prob, 0.1).unwrap();
    let sol = solve_lower(&ctx, &[0.5], 1e-11, None).unwrap();
    let hg = approx_hypergradient(&ctx, &[0.5], &sol).unwrap();
    assert_abs_diff_eq!(hg.grad[0], example1_phi_grad(0.1, 0.5), epsilon = 1e-8);
    assert_abs_diff_eq!(hg.grad[0], -0.32155, epsilon = 1e-5);
}

#[test]
fn fd_oracle_agrees_with_implicit_form() {
    let step = 1e-4;
    for (prob, x, t) in [
        (example1_problem(), vec![0.5], 0.1),
        (toy_qp_problem(), vec![1.0], 0.05),
    ] {
        let ctx = BarrierContext::new(&prob, t).unwrap();
        let sol = solve_lower(&ctx, &x, 1e-12, None).unwrap();
        let hg = approx_hypergradient(&ctx, &x, &sol).unwrap();
        let fd = fd_hyperfunction_grad(&ctx, &x, step, step.powi(3)).unwrap();
        let tol = 100.0 * step * step * (1.0 + linalg::norm(&fd));
        assert!(
            linalg::dist(&hg.grad, &fd) <= hg.error_bound + tol,
            "{}: gap {} exceeds bound {}",
            prob.name,
            linalg::dist(&hg.grad, &fd),
            hg.error_bound + tol
        );
    }
}

#[test]
fn error_bound_scales_with_residual() {
    let prob = toy_qp_problem();
    let ctx = BarrierContext::new(&prob, 0.1).unwrap();
    let loose = solve_lower(&ctx, &[1.0], 1e-4, None).unwrap();
    let tight = solve_lower(&ctx, &[1.0], 1e-8, Some(&loose.y_tilde)).unwrap();
    let hg_loose = approx_hypergradient(&ctx, &[1.0], &loose).unwrap();
    let hg_tight = approx_hypergradient(&ctx, &[1.0], &tight).unwrap();
    assert!(hg_tight.error_bound < hg_loose.error_bound);
}

#[test]
fn error_constant_decreases_with_margin() {
    let c = toy_qp_problem().constants;
    let mu = c.mu_g;
    assert!(
        hypergradient_error_bound(0.1, 1e-3, &c, mu)
            > hypergradient_error_bound(0.1, 1e-2, &c, mu)
    );
}

#[test]
fn fd_rejects_bad_step_and_boundary() {
    let prob = toy_qp_problem();
    let ctx = BarrierContext::new(&prob, 0.1).unwrap();
    assert!(matches!(
        fd_hyperfunction_grad(&ctx, &[1.0], 0.0, 1e-9),
        Err(Error::Config(_))
    ));
    // x = 0.2 sits on the upper box boundary; the stencil leaves the set.
    assert!(matches!(
        fd_hyperfunction_grad(&ctx, &[0.2], 1e-4, 1e-9),
        Err(Error::OutsideUpperSet)
    ));
}
