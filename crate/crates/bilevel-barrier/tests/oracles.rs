use approx::assert_abs_diff_eq;
use bilevel_barrier::linalg;
use bilevel_barrier::testbed::{
    brute_force_hyperfunction, brute_force_lower, estimate_tau, example1_problem,
    example1_problem_ball, kkt_multipliers, price_setting_problem, toy_qp_problem,
    BruteForceMode,
};
use bilevel_barrier::Error;

#[test]
fn example1_vertex_solution_and_multipliers() {
    // At x = 1 the objective gradient (1, 1) selects the vertex (-1, 0);
    // stationarity there gives lambda = (1, 1, 0) by hand.
    let prob = example1_problem();
    let cert = brute_force_lower(&prob, &[1.0], BruteForceMode::Vertex).unwrap();
    assert!(linalg::dist(&cert.y_star, &[-1.0, 0.0]) <= 1e-9);
    assert_abs_diff_eq!(cert.lambdas[0], 1.0, epsilon = 1e-8);
    assert_abs_diff_eq!(cert.lambdas[1], 1.0, epsilon = 1e-8);
    assert_abs_diff_eq!(cert.lambdas[2], 0.0, epsilon = 1e-12);
    assert!(cert.stationarity_residual <= 1e-8);
    assert_eq!(cert.active, vec![0, 1]);
}

#[test]
fn example1_sign_flip() {
    let prob = example1_problem();
    let cert = brute_force_lower(&prob, &[-1.0], BruteForceMode::Vertex).unwrap();
    assert!(linalg::dist(&cert.y_star, &[1.0, 0.0]) <= 1e-9);
}

#[test]
fn example1_fractional_x_multipliers() {
    // x = 0.5: lambda = (1, 0.5, 0) from (0.5, 1) + l1 (0,-1) + l2 (-1,0) = 0.
    let prob = example1_problem();
    let cert = brute_force_lower(&prob, &[0.5], BruteForceMode::Vertex).unwrap();
    assert_abs_diff_eq!(cert.lambdas[0], 1.0, epsilon = 1e-8);
    assert_abs_diff_eq!(cert.lambdas[1], 0.5, epsilon = 1e-8);
}

#[test]
fn toy_qp_interior_optimum() {
    // g = ||y||^2 / 2 has its unconstrained minimum at the origin, feasible
    // for every x in the box, so no constraint is active.
    let prob = toy_qp_problem();
    let cert = brute_force_lower(&prob, &[1.0], BruteForceMode::ActiveSet).unwrap();
    assert!(linalg::norm(&cert.y_star) <= 1e-9);
    assert!(cert.active.is_empty());
    assert!(cert.lambdas.iter().all(|&l| l == 0.0));
}

#[test]
fn toy_qp_forced_activation_matches_hand_kkt() {
    // Outside the default box at x = -0.5 the sum constraint activates:
    // y = (x/2, x/2), lambda_1 = -x/2 = 0.25.
    let prob = toy_qp_problem();
    let cert = brute_force_lower(&prob, &[-0.5], BruteForceMode::ActiveSet).unwrap();
    assert!(linalg::dist(&cert.y_star, &[-0.25, -0.25]) <= 1e-8);
    assert_abs_diff_eq!(cert.lambdas[0], 0.25, epsilon = 1e-7);
}

#[test]
fn grid_and_active_set_agree() {
    let prob = toy_qp_problem();
    for x in [0.4, 1.0, 1.5] {
        let fine = brute_force_lower(&prob, &[x], BruteForceMode::ActiveSet).unwrap();
        let grid = brute_force_lower(&prob, &[x], BruteForceMode::Grid(41)).unwrap();
        assert!(
            linalg::dist(&fine.y_star, &grid.y_star) <= 1e-4,
            "x={x}: {:?} vs {:?}",
            fine.y_star,
            grid.y_star
        );
    }
}

#[test]
fn multipliers_zero_at_interior_point() {
    let prob = toy_qp_problem();
    let (lambdas, residual) = kkt_multipliers(&prob, &[1.0], &[0.0, 0.0], 1e-6).unwrap();
    assert!(lambdas.iter().all(|&l| l == 0.0));
    assert!(residual <= 1e-9);
}

#[test]
fn multipliers_reject_non_optimal_point() {
    // (0.2, 0.2) is feasible but not stationary for toy_qp; no multiplier
    // assignment can zero the KKT residual there.
    let prob = toy_qp_problem();
    assert!(matches!(
        kkt_multipliers(&prob, &[1.0], &[0.2, 0.2], 1e-6),
        Err(Error::ResidualTooLarge(_))
    ));
}

#[test]
fn tau_on_augmented_polytope() {
    // x = 1 on the ball-augmented bilinear example: the objective gradient
    // meets the best escape direction at 45 degrees.
    let prob = example1_problem_ball();
    let tau = estimate_tau(&prob, &[1.0]).unwrap();
    assert_abs_diff_eq!(tau, 0.5f64.sqrt(), epsilon = 1e-6);
    assert!(tau >= 0.31);
}

#[test]
fn tau_undefined_at_degenerate_x() {
    // x = 0 makes g independent of y1: two vertices tie and tau is undefined.
    let prob = example1_problem_ball();
    assert!(matches!(estimate_tau(&prob, &[0.0]), Err(Error::NonUniqueOptimum)));
}

#[test]
fn hyperfunction_oracle_is_deterministic() {
    let prob = price_setting_problem(2, 1, 7);
    let a = brute_force_hyperfunction(&prob, &[0.3, 0.2], 5).unwrap();
    let b = brute_force_hyperfunction(&prob, &[0.3, 0.2], 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn hyperfunction_matches_direct_value_on_example1() {
    // phi(x) = y1*(x) = -1 for x = 1 (f picks out the first coordinate).
    let prob = example1_problem();
    let phi = brute_force_hyperfunction(&prob, &[1.0], 0).unwrap();
    assert_abs_diff_eq!(phi, -1.0, epsilon = 1e-8);
}
