//! Built-in problem instances and independent brute-force oracles. Every
//! property test in the crate checks the solver stack against the oracles
//! defined here, never against the solver itself.

mod oracles;

pub use oracles::{
    brute_force_hyperfunction, brute_force_lower, estimate_tau, kkt_multipliers, BruteForceMode,
    KktCertificate,
};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, Matrix};
use crate::problem::{
    augment_with_norm_ball, BallRule, BilevelProblem, Constraint, SettingClass,
    SmoothnessConstants, UpperSet,
};
use crate::{Error, Result};

/// Two-variable linear lower level with box-like constraints and a sign
/// change in the solution at `x = 0`: the original hyperfunction jumps
/// between -1 and +1 there while the barrier hyperfunction stays smooth.
///
/// `f = y_1`, `g = x y_1 + y_2`, constraints `y_2 >= 0`, `-1 <= y_1 <= 1`,
/// upper set a configurable box (default `[-1, 1]`).
pub fn example1_problem_on(x_lo: f64, x_hi: f64) -> BilevelProblem {
    let n = 1;
    let m = 2;
    BilevelProblem {
        name: "example1".into(),
        n,
        m,
        upper_set: UpperSet::Box { lower: vec![x_lo], upper: vec![x_hi] },
        setting: SettingClass::LinearLP,
        constants: SmoothnessConstants {
            l_f: 1.0,
            lbar_f: 0.0,
            l_g: 1.8,
            lbar_g: 1.0,
            lbarbar_g: 0.0,
            l_h: 1.0,
            lbar_h: 0.0,
            lbarbar_h: 0.0,
            mu_g: 0.0,
            r: 2.0,
            k: 3,
            t_max: 0.5,
            // Constraint gradients stack to sum = diag(2, 1); the feasible
            // slice with ||y|| <= R has every -h_i at most 2.
            sigma: 1.0,
            h_bound: 2.0,
        },
        f: Arc::new(|_, y| y[0]),
        grad_f: Arc::new(|_, _| (vec![0.0], vec![1.0, 0.0])),
        g: Arc::new(|x, y| x[0] * y[0] + y[1]),
        grad_g_y: Arc::new(|x, _| vec![x[0], 1.0]),
        hess_g_yy: Arc::new(|_, _| Matrix::zeros(2, 2)),
        hess_g_xy: Arc::new(|_, _| Matrix::from_rows(&[vec![1.0, 0.0]])),
        constraints: vec![
            Constraint::affine_const(n, m, vec![0.0, -1.0], 0.0), // y_2 >= 0
            Constraint::affine_const(n, m, vec![-1.0, 0.0], -1.0), // y_1 >= -1
            Constraint::affine_const(n, m, vec![1.0, 0.0], -1.0), // y_1 <= 1
        ],
        ball_rule: None,
    }
}

pub fn example1_problem() -> BilevelProblem {
    example1_problem_on(-1.0, 1.0)
}

/// [`example1_problem`] with the norm-ball constraint `||y||^2 <= R^2`
/// appended, making the lower feasible set compact (needed by the vertex
/// oracle and the tau estimator).
pub fn example1_problem_ball() -> BilevelProblem {
    augment_with_norm_ball(&example1_problem(), BallRule::Conservative)
}

/// Closed-form barrier minimizer and hyperfunction value for example 1:
/// `y_1 = (t - sqrt(t^2 + x^2)) / x` (0 at `x = 0`), `y_2 = t`,
/// `phi_tilde = y_1`.
pub fn example1_closed_form(t: f64, x: f64) -> (f64, f64, f64) {
    assert!(t > 0.0);
    let y1 = if x == 0.0 { 0.0 } else { (t - (t * t + x * x).sqrt()) / x };
    (y1, t, y1)
}

/// Minimal strongly convex instance with one coupled linear constraint and a
/// norm cap: `f = (y_1 - 1)^2 + (y_2 - 1)^2 + x^2`, `g = ||y||^2 / 2`,
/// `h_1 = y_1 + y_2 - x`, `h_2 = ||y||^2 - 4`, upper set `[0.2, 1.5]`.
pub fn toy_qp_problem() -> BilevelProblem {
    let n = 1;
    let m = 2;
    BilevelProblem {
        name: "toy_qp".into(),
        n,
        m,
        upper_set: UpperSet::Box { lower: vec![0.2], upper: vec![1.5] },
        setting: SettingClass::StronglyConvex,
        constants: SmoothnessConstants {
            l_f: 7.5,
            lbar_f: 2.0,
            l_g: 2.0,
            lbar_g: 1.0,
            lbarbar_g: 0.0,
            l_h: 4.0,
            lbar_h: 2.0,
            lbarbar_h: 0.0,
            mu_g: 1.0,
            r: 2.0,
            k: 2,
            t_max: 0.25,
            sigma: 0.0,
            h_bound: 0.0,
        },
        f: Arc::new(|x, y| (y[0] - 1.0).powi(2) + (y[1] - 1.0).powi(2) + x[0] * x[0]),
        grad_f: Arc::new(|x, y| {
            (vec![2.0 * x[0]], vec![2.0 * (y[0] - 1.0), 2.0 * (y[1] - 1.0)])
        }),
        g: Arc::new(|_, y| 0.5 * linalg::dot(y, y)),
        grad_g_y: Arc::new(|_, y| y.to_vec()),
        hess_g_yy: Arc::new(|_, _| Matrix::identity(2)),
        hess_g_xy: Arc::new(|_, _| Matrix::zeros(1, 2)),
        constraints: vec![
            // y_1 + y_2 - x <= 0, the coupled constraint.
            Constraint {
                h: Arc::new(|x, y| y[0] + y[1] - x[0]),
                grad_x: Arc::new(|_, _| vec![-1.0]),
                grad_y: Arc::new(|_, _| vec![1.0, 1.0]),
                hess_yy: Arc::new(|_, _| Matrix::zeros(2, 2)),
                hess_xy: Arc::new(|_, _| Matrix::zeros(1, 2)),
                affine_in_y: true,
            },
            // ||y||^2 <= 4.
            Constraint {
                h: Arc::new(|_, y| linalg::dot(y, y) - 4.0),
                grad_x: Arc::new(|_, _| vec![0.0]),
                grad_y: Arc::new(|_, y| linalg::scaled(y, 2.0)),
                hess_yy: Arc::new(|_, _| {
                    let mut h = Matrix::identity(2);
                    h.scale(2.0);
                    h
                }),
                hess_xy: Arc::new(|_, _| Matrix::zeros(1, 2)),
                affine_in_y: false,
            },
        ],
        ball_rule: None,
    }
}

/// Leader sets taxes `T` on the taxable activities; the follower picks
/// activity levels minimizing tax-inclusive cost subject to a demand floor
/// (mildly tax-dependent), nonnegativity, and a capacity budget. Data is
/// generated from the seed and scaled so the demand floor keeps a Slater
/// slack of at least 1 over the whole upper box.
pub fn price_setting_problem(taxable: usize, nontaxable: usize, seed: u64) -> BilevelProblem {
    let n = taxable;
    let m = taxable + nontaxable;
    assert!(m <= 6 && m >= 2, "follower dimension must be in [2, 6]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let c1: Vec<f64> = (0..taxable).map(|_| rng.gen_range(0.3..0.7)).collect();
    let c2: Vec<f64> = (0..nontaxable).map(|_| rng.gen_range(0.3..0.7)).collect();
    // Unit-norm demand row keeps the constraint gradient bound small.
    let mut a: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.5)).collect();
    let an = linalg::norm(&a);
    for ai in &mut a {
        *ai /= an;
    }
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    // Demand floor calibrated to slack 1.5 at the all-ones point, for any T.
    let b0 = a.iter().sum::<f64>() - 1.5;
    let budget = 4.0;

    let mut constraints = Vec::new();
    // Demand: b0 + 0.1 w^T T - a^T v <= 0.
    {
        let (a_c, w_c) = (a.clone(), w.clone());
        let w_g = w.clone();
        constraints.push(Constraint::affine(
            n,
            m,
            move |_| linalg::scaled(&a_c, -1.0),
            move |x| b0 + 0.1 * linalg::dot(&w_c, x),
            move |_| linalg::scaled(&w_g, 0.1),
            move |_| Matrix::zeros(n, m),
        ));
    }
    // Nonnegativity.
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = -1.0;
        constraints.push(Constraint::affine_const(n, m, e, 0.0));
    }
    // Capacity budget: sum v <= budget.
    constraints.push(Constraint::affine_const(n, m, vec![1.0; m], -budget));

    let k = constraints.len();
    // sigma: smallest eigenvalue of the stacked gradient outer-product sum,
    // constant in (x, y) because everything is affine with x-independent
    // coefficients in y.
    let sigma = {
        let mut s = Matrix::zeros(m, m);
        s.add_assign(&Matrix::outer(&a, &a, 1.0));
        s.add_assign(&Matrix::identity(m));
        s.add_assign(&Matrix::outer(&vec![1.0; m], &vec![1.0; m], 1.0));
        min_eig_estimate(&s)
    };
    // H: largest -h_i over the budget simplex; nonneg and budget rows top out
    // at `budget`, the demand row at max(a) * budget - b0.
    let amax = a.iter().cloned().fold(0.0f64, f64::max);
    let h_bound = budget.max(amax * budget - b0);

    let (c1_g, c2_g) = (c1.clone(), c2.clone());
    let c1_f = c1.clone();
    BilevelProblem {
        name: "price_setting".into(),
        n,
        m,
        upper_set: UpperSet::Box { lower: vec![0.0; n], upper: vec![0.5; n] },
        setting: SettingClass::LinearLP,
        constants: SmoothnessConstants {
            l_f: 4.3,
            lbar_f: 1.0,
            // Each entry of grad_y g is c_i + T_i <= 0.7 + 0.5.
            l_g: 1.25 * (m as f64).sqrt(),
            lbar_g: 1.0,
            lbarbar_g: 0.0,
            l_h: (m as f64).sqrt().max(1.01),
            lbar_h: 0.0,
            lbarbar_h: 0.0,
            mu_g: 0.0,
            r: budget,
            k,
            t_max: 0.12,
            sigma,
            h_bound,
        },
        // Leader revenue T^T v_taxable, negated into minimization.
        f: Arc::new(move |x, y| -linalg::dot(x, &y[..x.len()])),
        grad_f: Arc::new(move |x, y| {
            let gx = linalg::scaled(&y[..x.len()], -1.0);
            let mut gy = vec![0.0; y.len()];
            for i in 0..x.len() {
                gy[i] = -x[i];
            }
            (gx, gy)
        }),
        g: Arc::new(move |x, y| {
            let tax: f64 = (0..c1_f.len()).map(|i| (c1_f[i] + x[i]) * y[i]).sum();
            tax + linalg::dot(&c2_g, &y[c1_f.len()..])
        }),
        grad_g_y: Arc::new(move |x, _| {
            let mut g: Vec<f64> = c1_g.iter().zip(x).map(|(c, t)| c + t).collect();
            g.extend(c2.iter());
            g
        }),
        hess_g_yy: Arc::new(move |_, _| Matrix::zeros(m, m)),
        hess_g_xy: Arc::new(move |_, _| {
            let mut h = Matrix::zeros(n, m);
            for i in 0..n {
                h[(i, i)] = 1.0;
            }
            h
        }),
        constraints,
        ball_rule: None,
    }
}

/// Smallest eigenvalue of a symmetric PSD matrix by bisection on the
/// factorization probe.
fn min_eig_estimate(s: &Matrix) -> f64 {
    let mut lo = 0.0;
    let mut hi = s.max_abs() * (s.rows as f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if crate::linalg::min_eig_lower_bound(s, mid).unwrap_or(false) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Soft-margin SVM hyperparameter tuning at desk scale: the lower level fits
/// `(w, b, xi)` on synthetic training data, the upper level tunes per-sample
/// slack caps `c` against an exponential validation loss plus `||c||^2 / 2`.
///
/// The published lower objective `||w||^2 / 2` is strongly convex in `w`
/// only; a small regularizer `mu0 (b^2 + ||xi||^2) / 2` (default
/// `mu0 = 1e-2`) extends strong convexity to all lower variables.
pub fn svm_problem(n_train: usize, n_val: usize, d: usize, seed: u64) -> BilevelProblem {
    svm_problem_with_mu0(n_train, n_val, d, seed, 1e-2)
}

pub fn svm_problem_with_mu0(
    n_train: usize,
    n_val: usize,
    d: usize,
    seed: u64,
    mu0: f64,
) -> BilevelProblem {
    assert!(n_train <= 30 && d <= 5, "desk scale only");
    let (train, val) = svm_synthetic_data(n_train, n_val, d, seed);
    let n = n_train; // upper variable: one slack cap per training point
    let m = d + 1 + n_train; // lower variable: (w, b, xi)

    let mut constraints: Vec<Constraint> = Vec::new();
    // Margin constraints: 1 - xi_i - l_i (z_i^T w + b) <= 0.
    for (i, (z, l)) in train.iter().enumerate() {
        let mut coeff = vec![0.0; m];
        for (j, zj) in z.iter().enumerate() {
            coeff[j] = -l * zj;
        }
        coeff[d] = -l;
        coeff[d + 1 + i] = -1.0;
        constraints.push(Constraint::affine_const(n, m, coeff, 1.0));
    }
    // Cap constraints: xi_i - c_i <= 0 (c is the upper variable).
    for i in 0..n_train {
        let mut coeff = vec![0.0; m];
        coeff[d + 1 + i] = 1.0;
        let mut grad_x = vec![0.0; n];
        grad_x[i] = -1.0;
        let gx = grad_x.clone();
        constraints.push(Constraint::affine(
            n,
            m,
            move |_| coeff.clone(),
            {
                move |x: &[f64]| -x[i]
            },
            move |_| gx.clone(),
            move |_| Matrix::zeros(n, m),
        ));
    }
    let k = constraints.len();

    let val_f = val.clone();
    let val_g = val.clone();
    let d_f = d;
    BilevelProblem {
        name: "svm".into(),
        n,
        m,
        // Caps at least 3 keep the Slater slack at 1 for the witness
        // (w, b) = 0, xi = (1 + c) / 2.
        upper_set: UpperSet::Box { lower: vec![3.0; n], upper: vec![3.2; n] },
        setting: SettingClass::StronglyConvex,
        constants: SmoothnessConstants {
            // f has exponential terms; these are suprema over ||y|| <= R.
            l_f: 2.0e5,
            lbar_f: 2.5e5,
            l_g: 4.1,
            lbar_g: 1.0,
            lbarbar_g: 0.0,
            l_h: 1.8,
            lbar_h: 0.0,
            lbarbar_h: 0.0,
            mu_g: mu0.min(1.0),
            r: 4.0,
            k,
            t_max: 0.15,
            sigma: 0.0,
            h_bound: 0.0,
        },
        f: Arc::new(move |x, y| {
            let loss: f64 = val_f
                .iter()
                .map(|(z, l)| (1.0 - l * (linalg::dot(z, &y[..d_f]) + y[d_f])).exp())
                .sum();
            loss + 0.5 * linalg::dot(x, x)
        }),
        grad_f: Arc::new(move |x, y| {
            let mut gy = vec![0.0; y.len()];
            for (z, l) in &val_g {
                let e = (1.0 - l * (linalg::dot(z, &y[..d_f]) + y[d_f])).exp();
                for j in 0..d_f {
                    gy[j] += -l * z[j] * e;
                }
                gy[d_f] += -l * e;
            }
            (x.to_vec(), gy)
        }),
        g: Arc::new(move |_, y| {
            let w2 = linalg::dot(&y[..d], &y[..d]);
            let rest = linalg::dot(&y[d..], &y[d..]);
            0.5 * w2 + 0.5 * mu0 * rest
        }),
        grad_g_y: Arc::new(move |_, y| {
            let mut g = y.to_vec();
            for gi in g.iter_mut().skip(d) {
                *gi *= mu0;
            }
            g
        }),
        hess_g_yy: Arc::new(move |_, y| {
            let mut h = Matrix::identity(y.len());
            for j in d..y.len() {
                h[(j, j)] = mu0;
            }
            h
        }),
        hess_g_xy: Arc::new(move |_, y| Matrix::zeros(n_train, y.len())),
        constraints,
        ball_rule: None,
    }
}

/// Two Gaussian-ish clusters (uniform noise) with 5% label flips; features
/// normalized into the unit ball. Reproducible from the seed.
fn svm_synthetic_data(
    n_train: usize,
    n_val: usize,
    d: usize,
    seed: u64,
) -> (Vec<(Vec<f64>, f64)>, Vec<(Vec<f64>, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center: Vec<f64> = vec![0.6 / (d as f64).sqrt(); d];
    let mut draw = |count: usize| -> Vec<(Vec<f64>, f64)> {
        (0..count)
            .map(|i| {
                let l: f64 = if i % 2 == 0 { 1.0 } else { -1.0 };
                let mut z: Vec<f64> =
                    center.iter().map(|c| l * c + rng.gen_range(-0.3..0.3)).collect();
                let zn = linalg::norm(&z);
                if zn > 1.0 {
                    for zi in &mut z {
                        *zi /= zn;
                    }
                }
                let flipped = rng.gen_range(0.0..1.0) < 0.05;
                (z, if flipped { -l } else { l })
            })
            .collect()
    };
    (draw(n_train), draw(n_val))
}

/// Looks up a built-in problem by CLI name.
pub fn by_name(name: &str) -> Result<BilevelProblem> {
    match name {
        "example1" => Ok(example1_problem()),
        "example1_ball" => Ok(example1_problem_ball()),
        "toy_qp" => Ok(toy_qp_problem()),
        "price_setting" => Ok(price_setting_problem(2, 1, 7)),
        "svm" => Ok(svm_problem(2, 2, 2, 11)),
        other => Err(Error::Config(format!("unknown problem '{other}'"))),
    }
}
