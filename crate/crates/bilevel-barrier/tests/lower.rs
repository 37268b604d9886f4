use approx::assert_abs_diff_eq;
use bilevel_barrier::barrier::BarrierContext;
use bilevel_barrier::lower::{
    inner_iteration_budget, margin_stage, solve_lower, solve_lower_staged, InnerVariant,
    MAX_INNER_ITERS,
};
use bilevel_barrier::testbed::{example1_closed_form, example1_problem, toy_qp_problem};
use bilevel_barrier::Error;

#[test]
fn budget_formula_reference_value() {
    // ceil(sqrt(100) * ln(2 / (1 * 1e-6))) = ceil(10 * ln(2e6)) = 146.
    assert_eq!(inner_iteration_budget(100.0, 1.0, 1e-3, 1.0), 146);
}

#[test]
fn budget_kappa_one_small_gap() {
    // gap0 = mu eps^2 / 2 * e^2 makes the log term exactly 2.
    let eps = 1e-3f64;
    let gap0 = eps * eps / 2.0 * std::f64::consts::E.powi(2);
    assert_eq!(inner_iteration_budget(1.0, 1.0, eps, gap0), 2);
}

#[test]
fn budget_monotone_in_eps_and_clamped() {
    let j1 = inner_iteration_budget(100.0, 1.0, 1e-3, 1.0);
    let j2 = inner_iteration_budget(100.0, 1.0, 2e-3, 1.0);
    assert!(j2 <= j1);
    assert!(j1 - j2 <= (10.0 * 4.0f64.ln()).ceil() as usize);
    assert_eq!(inner_iteration_budget(1e12, 1.0, 1e-9, 1e6), MAX_INNER_ITERS);
    assert_eq!(inner_iteration_budget(1.0, 1.0, 1e3, 1e-12), 1);
}

#[test]
fn solves_example1_to_closed_form() {
    let prob = example1_problem();
    let ctx = BarrierContext::new(&prob, 0.1).unwrap();
    let sol = solve_lower(&ctx, &[1.0], 1e-8, None).unwrap();
    let (y1, y2, _) = example1_closed_form(0.1, 1.0);
    assert_abs_diff_eq!(sol.y_tilde[0], y1, epsilon = 1e-7);
    assert_abs_diff_eq!(sol.y_tilde[1], y2, epsilon = 1e-7);
    assert_abs_diff_eq!(y1, -0.904988, epsilon = 1e-6);
    assert!(sol.residual_bound <= 1e-8);
}

#[test]
fn solves_example1_at_zero_x() {
    let prob = example1_problem();
    let ctx = BarrierContext::new(&prob, 0.05).unwrap();
    let sol = solve_lower(&ctx, &[0.0], 1e-8, None).unwrap();
    assert_abs_diff_eq!(sol.y_tilde[0], 0.0, epsilon = 1e-7);
    assert_abs_diff_eq!(sol.y_tilde[1], 0.05, epsilon = 1e-7);
}

#[test]
fn warm_start_at_optimum_certifies_quickly() {
    let prob = toy_qp_problem();
    let ctx = BarrierContext::new(&prob, 0.05).unwrap();
    let first = solve_lower(&ctx, &[1.0], 1e-9, None).unwrap();
    let again = solve_lower(&ctx, &[1.0], 1e-6, Some(&first.y_tilde)).unwrap();
    assert!(
        again.inner_iters <= 3,
        "warm restart at the optimum took {} iterations",
        again.inner_iters
    );
    assert!(again.residual_bound <= 1e-6);
}

#[test]
fn both_variants_agree() {
    let prob = toy_qp_problem();
    let ctx = BarrierContext::new(&prob, 0.1).unwrap();
    let stage = margin_stage(&ctx, &[0.7]).unwrap();
    let a = solve_lower_staged(&ctx, &[0.7], &stage, 1e-9, None, InnerVariant::Verbatim).unwrap();
    let b = solve_lower_staged(&ctx, &[0.7], &stage, 1e-9, None, InnerVariant::Standard).unwrap();
    for (ai, bi) in a.y_tilde.iter().zip(&b.y_tilde) {
        assert_abs_diff_eq!(ai, bi, epsilon = 2e-9);
    }
}

#[test]
fn margin_stage_constants_are_consistent() {
    let prob = toy_qp_problem();
    let ctx = BarrierContext::new(&prob, 0.1).unwrap();
    let stage = margin_stage(&ctx, &[1.0]).unwrap();
    assert!(stage.d_s > 0.0 && stage.m_s > 0.0);
    assert!(stage.m_s <= stage.d_s / 2.0);
    assert!(stage.l_smooth >= stage.mu && stage.mu > 0.0);
    // Strongly convex setting reports mu_g itself.
    assert_eq!(stage.mu, prob.constants.mu_g);
}

#[test]
fn rejects_nonpositive_accuracy() {
    let prob = toy_qp_problem();
    let ctx = BarrierContext::new(&prob, 0.1).unwrap();
    assert!(matches!(solve_lower(&ctx, &[1.0], 0.0, None), Err(Error::Config(_))));
}

#[test]
fn variant_parsing() {
    assert_eq!("verbatim".parse::<InnerVariant>().unwrap(), InnerVariant::Verbatim);
    assert_eq!("standard".parse::<InnerVariant>().unwrap(), InnerVariant::Standard);
    assert!("nesterov".parse::<InnerVariant>().is_err());
}
