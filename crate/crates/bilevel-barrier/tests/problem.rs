use approx::assert_abs_diff_eq;
use bilevel_barrier::problem::{
    augment_with_norm_ball, check_derivative_consistency, eval_constraints, project_upper,
    BallRule, UpperSet,
};
use bilevel_barrier::testbed::{
    by_name, example1_closed_form, example1_problem, price_setting_problem, svm_problem,
    toy_qp_problem,
};

#[test]
fn box_projection_clamps_per_coordinate() {
    let set = UpperSet::Box { lower: vec![-1.0, -1.0], upper: vec![1.0, 1.0] };
    assert_eq!(project_upper(&set, &[2.0, 0.5]).unwrap(), vec![1.0, 0.5]);
    assert_eq!(project_upper(&set, &[0.3, -0.4]).unwrap(), vec![0.3, -0.4]);
    assert!(project_upper(&set, &[1.0]).is_err());
}

#[test]
fn ball_projection_rescales_radially() {
    let set = UpperSet::Ball { center: vec![0.0, 0.0], radius: 1.0 };
    let p = project_upper(&set, &[3.0, 4.0]).unwrap();
    assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-15);
    assert_abs_diff_eq!(p[1], 0.8, epsilon = 1e-15);
    assert_eq!(project_upper(&set, &[0.1, 0.2]).unwrap(), vec![0.1, 0.2]);
}

#[test]
fn ball_augmentation_appends_one_constraint() {
    let base = example1_problem();
    let aug = augment_with_norm_ball(&base, BallRule::Conservative);
    assert_eq!(aug.k(), base.k() + 1);
    assert_eq!(aug.name, format!("{}+ball", base.name));
    assert_eq!(aug.ball_rule, Some(BallRule::Conservative));
    // New constraint is ||y||^2 - R^2 at the tail.
    let h = eval_constraints(&aug, &[0.5], &[1.0, 1.0]).unwrap();
    let r = base.constants.r;
    assert_abs_diff_eq!(h[aug.k() - 1], 2.0 - r * r, epsilon = 1e-15);
    // Its registry constants cover the quadratic term.
    assert!(aug.constants.l_h >= 2.0 * r);
    assert!(aug.constants.lbar_h >= 2.0);
}

#[test]
fn registry_lookup() {
    for name in ["example1", "example1_ball", "toy_qp", "price_setting", "svm"] {
        let prob = by_name(name).unwrap();
        assert!(prob.n >= 1 && prob.m >= 2);
    }
    assert!(by_name("rosenbrock").is_err());
}

#[test]
fn closed_form_limits() {
    let (y1, y2, phi) = example1_closed_form(0.3, 0.0);
    assert_eq!((y1, y2), (0.0, 0.3));
    assert_eq!(phi, y1);
    // Odd symmetry in x.
    let (a, _, _) = example1_closed_form(0.1, 0.7);
    let (b, _, _) = example1_closed_form(0.1, -0.7);
    assert_abs_diff_eq!(a, -b, epsilon = 1e-15);
}

#[test]
fn all_testbed_derivatives_are_consistent() {
    for prob in [
        example1_problem(),
        toy_qp_problem(),
        price_setting_problem(2, 1, 7),
        svm_problem(2, 2, 2, 11),
    ] {
        let report = check_derivative_consistency(&prob, 5, 1e-5, 3).unwrap();
        assert!(
            report.flagged().is_empty(),
            "{}: max relative error {}",
            prob.name,
            report.max_rel_error()
        );
    }
}

#[test]
fn seeded_generators_are_reproducible() {
    let a = price_setting_problem(2, 1, 123);
    let b = price_setting_problem(2, 1, 123);
    let x = [0.3, 0.1];
    let y = [0.5, 0.5, 0.5];
    assert_eq!((a.g)(&x, &y), (b.g)(&x, &y));
    assert_eq!(
        eval_constraints(&a, &x, &y).unwrap(),
        eval_constraints(&b, &x, &y).unwrap()
    );
}
