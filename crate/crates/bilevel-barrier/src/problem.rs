//! Problem instances: derivative oracles for `f`, `g`, `h_i`, the upper-level
//! feasible set, the setting classification, and the constant registry every
//! certified bound is computed from. A finite-difference consistency checker
//! guards against miswired oracles.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, Matrix, Vector};
use crate::{Error, Result};

/// `(x, y) -> scalar` oracle.
pub type ScalarOracle = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// `(x, y) -> vector` oracle.
pub type VectorOracle = Arc<dyn Fn(&[f64], &[f64]) -> Vector + Send + Sync>;
/// `(x, y) -> matrix` oracle.
pub type MatrixOracle = Arc<dyn Fn(&[f64], &[f64]) -> Matrix + Send + Sync>;

/// Upper-level feasible set with a closed-form Euclidean projection.
#[derive(Clone, Debug)]
pub enum UpperSet {
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
}

impl UpperSet {
    pub fn dim(&self) -> usize {
        match self {
            UpperSet::Box { lower, .. } => lower.len(),
            UpperSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            UpperSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(xi, (lo, hi))| *xi >= lo - tol && *xi <= hi + tol),
            UpperSet::Ball { center, radius } => linalg::dist(x, center) <= radius + tol,
        }
    }
}

/// Euclidean projection onto the upper set: per-coordinate clamping for boxes,
/// radial rescaling for balls.
pub fn project_upper(set: &UpperSet, x: &[f64]) -> Result<Vector> {
    if x.len() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: x.len() });
    }
    Ok(match set {
        UpperSet::Box { lower, upper } => x
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(xi, (lo, hi))| xi.max(*lo).min(*hi))
            .collect(),
        UpperSet::Ball { center, radius } => {
            let d = linalg::dist(x, center);
            if d <= *radius {
                x.to_vec()
            } else {
                let t = radius / d;
                center.iter().zip(x).map(|(c, xi)| c + t * (xi - c)).collect()
            }
        }
    })
}

/// Lower-level structure classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SettingClass {
    /// `g` is `mu_g`-strongly convex in `y`, `h_i` convex in `y`.
    StronglyConvex,
    /// `g` and all `h_i` affine in `y` with a compact lower feasible set.
    LinearLP,
}

/// Which strong-convexity constant the norm-ball augmentation contributes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallRule {
    /// `2t / R^2`, the value the augmented barrier Hessian actually certifies.
    Conservative,
    /// `2t / R`, the looser published value; opt-in override.
    AsPublished,
}

/// Registry of Lipschitz / curvature constants. All bounds the solver
/// certifies are computed from these; they are supplied by the problem
/// author, never estimated.
#[derive(Clone, Copy, Debug)]
pub struct SmoothnessConstants {
    /// Bound on the full gradient norm of `f`.
    pub l_f: f64,
    /// Gradient-Lipschitz constant of `f`.
    pub lbar_f: f64,
    /// Bound on the full gradient norm of `g`.
    pub l_g: f64,
    /// Gradient-Lipschitz constant of `g`.
    pub lbar_g: f64,
    /// Hessian-Lipschitz constant of `g`.
    pub lbarbar_g: f64,
    /// Bound on each constraint's full gradient norm.
    pub l_h: f64,
    /// Gradient-Lipschitz constant of each constraint.
    pub lbar_h: f64,
    /// Hessian-Lipschitz constant of each constraint.
    pub lbarbar_h: f64,
    /// Strong-convexity modulus of `g` in `y` (0 for the linear setting).
    pub mu_g: f64,
    /// Bound on `||y||` over the lower feasible set.
    pub r: f64,
    /// Number of lower-level constraints.
    pub k: usize,
    /// Largest barrier parameter the constants are certified for.
    pub t_max: f64,
    /// Linear setting: smallest eigenvalue of `A(x) A(x)^T` over the upper
    /// set, where `A(x)` stacks the constraint gradients.
    pub sigma: f64,
    /// Linear setting: bound on `-h_i(x,y)` over the feasible region.
    pub h_bound: f64,
}

/// One lower-level inequality constraint `h_i(x,y) <= 0` with derivatives.
#[derive(Clone)]
pub struct Constraint {
    pub h: ScalarOracle,
    pub grad_x: VectorOracle,
    pub grad_y: VectorOracle,
    /// `m x m`.
    pub hess_yy: MatrixOracle,
    /// `n x m`.
    pub hess_xy: MatrixOracle,
    /// Affine in `y` for every fixed `x`; enables exact polyhedral projections.
    pub affine_in_y: bool,
}

impl Constraint {
    /// Builds an affine-in-`y` constraint `a(x)^T y + c(x) <= 0` from the
    /// coefficient and offset maps; derivative oracles are wired up
    /// automatically.
    pub fn affine(
        n: usize,
        m: usize,
        coeff: impl Fn(&[f64]) -> Vector + Send + Sync + Clone + 'static,
        offset: impl Fn(&[f64]) -> f64 + Send + Sync + Clone + 'static,
        offset_grad_x: impl Fn(&[f64]) -> Vector + Send + Sync + Clone + 'static,
        coeff_jac_x: impl Fn(&[f64]) -> Matrix + Send + Sync + Clone + 'static,
    ) -> Constraint {
        let (c1, c2, c3) = (coeff.clone(), coeff.clone(), coeff_jac_x.clone());
        let (o1, o2) = (offset.clone(), offset_grad_x.clone());
        Constraint {
            h: Arc::new(move |x, y| linalg::dot(&c1(x), y) + o1(x)),
            grad_x: Arc::new(move |x, y| {
                debug_assert_eq!((x.len(), y.len()), (n, m));
                let jac = c3(x); // n x m, rows are d a / d x_i
                let mut gx = o2(x);
                for i in 0..gx.len() {
                    for j in 0..y.len() {
                        gx[i] += jac[(i, j)] * y[j];
                    }
                }
                gx
            }),
            grad_y: Arc::new(move |x, _| c2(x)),
            hess_yy: Arc::new(move |_, y| Matrix::zeros(y.len(), y.len())),
            hess_xy: Arc::new(move |x, _| coeff_jac_x(x)),
            affine_in_y: true,
        }
    }

    /// Affine constraint whose data does not depend on `x`.
    pub fn affine_const(n: usize, m: usize, a: Vector, c: f64) -> Constraint {
        Constraint::affine(
            n,
            m,
            move |_| a.clone(),
            move |_| c,
            move |_| vec![0.0; n],
            move |_| Matrix::zeros(n, m),
        )
    }
}

/// A bilevel problem instance. Oracles must be pure and finite on the interior
/// of the lower feasible set; all fields are immutable after construction.
#[derive(Clone)]
pub struct BilevelProblem {
    pub name: String,
    /// Upper dimension.
    pub n: usize,
    /// Lower dimension.
    pub m: usize,
    pub upper_set: UpperSet,
    pub setting: SettingClass,
    pub constants: SmoothnessConstants,
    pub f: ScalarOracle,
    /// Returns `(grad_x f, grad_y f)`.
    pub grad_f: Arc<dyn Fn(&[f64], &[f64]) -> (Vector, Vector) + Send + Sync>,
    pub g: ScalarOracle,
    pub grad_g_y: VectorOracle,
    /// `m x m`.
    pub hess_g_yy: MatrixOracle,
    /// `n x m`.
    pub hess_g_xy: MatrixOracle,
    pub constraints: Vec<Constraint>,
    /// Set when the norm-ball augmentation appended `||y||^2 <= R^2`.
    pub ball_rule: Option<BallRule>,
}

impl BilevelProblem {
    pub fn k(&self) -> usize {
        self.constraints.len()
    }
}

/// Appends the constraint `||y||^2 - R^2 <= 0` and bumps `k`. Used to make the
/// lower feasible set compact (linear setting) and to contribute barrier
/// curvature when `sigma`/`h_bound` are unknown.
pub fn augment_with_norm_ball(prob: &BilevelProblem, rule: BallRule) -> BilevelProblem {
    let mut out = prob.clone();
    let r2 = prob.constants.r * prob.constants.r;
    let n = prob.n;
    out.constraints.push(Constraint {
        h: Arc::new(move |_, y| linalg::dot(y, y) - r2),
        grad_x: Arc::new(move |_, _| vec![0.0; n]),
        grad_y: Arc::new(|_, y| linalg::scaled(y, 2.0)),
        hess_yy: Arc::new(|_, y| {
            let mut m = Matrix::identity(y.len());
            m.scale(2.0);
            m
        }),
        hess_xy: Arc::new(move |_, y| Matrix::zeros(n, y.len())),
        affine_in_y: false,
    });
    out.constants.k += 1;
    // The ball gradient norm 2||y|| <= 2R and its Hessian 2I may exceed the
    // original constraint constants; widen them so the registry stays honest.
    out.constants.l_h = out.constants.l_h.max(2.0 * prob.constants.r);
    out.constants.lbar_h = out.constants.lbar_h.max(2.0);
    out.ball_rule = Some(rule);
    out.name = format!("{}+ball", prob.name);
    out
}

/// Evaluates all constraints at `(x, y)`.
pub fn eval_constraints(prob: &BilevelProblem, x: &[f64], y: &[f64]) -> Result<Vector> {
    if x.len() != prob.n {
        return Err(Error::DimensionMismatch { expected: prob.n, got: x.len() });
    }
    if y.len() != prob.m {
        return Err(Error::DimensionMismatch { expected: prob.m, got: y.len() });
    }
    let mut vals = Vec::with_capacity(prob.k());
    for (i, c) in prob.constraints.iter().enumerate() {
        let v = (c.h)(x, y);
        if !v.is_finite() {
            return Err(Error::OracleFailure(format!("h_{i}")));
        }
        vals.push(v);
    }
    Ok(vals)
}

/// One derivative-consistency finding.
#[derive(Clone, Debug)]
pub struct ConsistencyEntry {
    /// Which oracle was compared, e.g. `grad_g_y` or `hess_h2_yy`.
    pub name: String,
    /// Worst relative error against central finite differences.
    pub rel_error: f64,
    pub flagged: bool,
}

/// Output of [`check_derivative_consistency`].
#[derive(Clone, Debug, Default)]
pub struct ConsistencyReport {
    pub entries: Vec<ConsistencyEntry>,
    pub samples_used: usize,
}

impl ConsistencyReport {
    pub fn flagged(&self) -> Vec<&ConsistencyEntry> {
        self.entries.iter().filter(|e| e.flagged).collect()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().fold(0.0, |a, e| a.max(e.rel_error))
    }

    fn record(&mut self, name: &str, err: f64, threshold: f64) {
        match self.entries.iter_mut().find(|e| e.name == name) {
            Some(e) => {
                e.rel_error = e.rel_error.max(err);
                e.flagged = e.flagged || err > threshold;
            }
            None => self.entries.push(ConsistencyEntry {
                name: name.to_string(),
                rel_error: err,
                flagged: err > threshold,
            }),
        }
    }
}

fn sample_box(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vector {
    lo.iter().zip(hi).map(|(a, b)| rng.gen_range(*a..=*b)).collect()
}

/// Draws `(x, y)` pairs strictly inside the constraint interior (margin 0.1)
/// by rejection sampling from `x` in the upper set and `y` in `[-R, R]^m`.
fn sample_interior(
    prob: &BilevelProblem,
    count: usize,
    margin: f64,
    seed: u64,
) -> Result<Vec<(Vector, Vector)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = prob.constants.r;
    let (xlo, xhi) = match &prob.upper_set {
        UpperSet::Box { lower, upper } => (lower.clone(), upper.clone()),
        UpperSet::Ball { center, radius } => (
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        ),
    };
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 20_000 * count {
            return Err(Error::NoInteriorPoint);
        }
        let x = sample_box(&mut rng, &xlo, &xhi);
        if !prob.upper_set.contains(&x, 0.0) {
            continue;
        }
        let y = sample_box(&mut rng, &vec![-r; prob.m], &vec![r; prob.m]);
        let h = eval_constraints(prob, &x, &y)?;
        if h.iter().all(|v| *v <= -margin) {
            out.push((x, y));
        }
    }
    Ok(out)
}

fn rel_err(analytic: &[f64], fd: &[f64]) -> f64 {
    let scale = 1.0 + linalg::norm(analytic);
    linalg::dist(analytic, fd) / scale
}

fn rel_err_mat(analytic: &Matrix, fd: &Matrix) -> f64 {
    let scale = 1.0 + analytic.frobenius();
    let mut diff = analytic.clone();
    let mut neg = fd.clone();
    neg.scale(-1.0);
    diff.add_assign(&neg);
    diff.frobenius() / scale
}

/// Compares every analytic derivative oracle against central finite
/// differences at seeded interior samples. An entry is flagged when its
/// relative error exceeds `100 * step^2` (times the entry's natural scale,
/// folded into the relative error).
pub fn check_derivative_consistency(
    prob: &BilevelProblem,
    samples: usize,
    step: f64,
    seed: u64,
) -> Result<ConsistencyReport> {
    if !(step > 0.0 && step <= 1e-2) {
        return Err(Error::Config(format!("step {step} outside (0, 1e-2]")));
    }
    let threshold = 100.0 * step * step;
    let points = sample_interior(prob, samples, 0.1, seed)?;
    let mut report = ConsistencyReport { samples_used: points.len(), ..Default::default() };

    let fd_scalar = |f: &dyn Fn(&[f64], &[f64]) -> f64, x: &[f64], y: &[f64]| -> (Vector, Vector) {
        let mut gx = vec![0.0; x.len()];
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += step;
            xm[i] -= step;
            gx[i] = (f(&xp, y) - f(&xm, y)) / (2.0 * step);
        }
        let mut gy = vec![0.0; y.len()];
        for j in 0..y.len() {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[j] += step;
            ym[j] -= step;
            gy[j] = (f(x, &yp) - f(x, &ym)) / (2.0 * step);
        }
        (gx, gy)
    };
    // FD of a vector field in y -> m x m matrix (column j = d field / d y_j,
    // transposed into rows to match the symmetric Hessian layout).
    let fd_jac_y = |field: &dyn Fn(&[f64], &[f64]) -> Vector, x: &[f64], y: &[f64]| -> Matrix {
        let mut jac = Matrix::zeros(y.len(), y.len());
        for j in 0..y.len() {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[j] += step;
            ym[j] -= step;
            let d = linalg::sub(&field(x, &yp), &field(x, &ym));
            for i in 0..y.len() {
                jac[(j, i)] = d[i] / (2.0 * step);
            }
        }
        jac
    };
    let fd_jac_x = |field: &dyn Fn(&[f64], &[f64]) -> Vector, x: &[f64], y: &[f64]| -> Matrix {
        let mut jac = Matrix::zeros(x.len(), y.len());
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += step;
            xm[i] -= step;
            let d = linalg::sub(&field(&xp, y), &field(&xm, y));
            for j in 0..y.len() {
                jac[(i, j)] = d[j] / (2.0 * step);
            }
        }
        jac
    };

    for (x, y) in &points {
        let (fd_fx, fd_fy) = fd_scalar(&*prob.f, x, y);
        let (afx, afy) = (prob.grad_f)(x, y);
        report.record("grad_f_x", rel_err(&afx, &fd_fx), threshold);
        report.record("grad_f_y", rel_err(&afy, &fd_fy), threshold);

        let (_, fd_gy) = fd_scalar(&*prob.g, x, y);
        let agy = (prob.grad_g_y)(x, y);
        report.record("grad_g_y", rel_err(&agy, &fd_gy), threshold);

        let gy_field = |x: &[f64], y: &[f64]| (prob.grad_g_y)(x, y);
        report.record(
            "hess_g_yy",
            rel_err_mat(&(prob.hess_g_yy)(x, y), &fd_jac_y(&gy_field, x, y)),
            threshold,
        );
        report.record(
            "hess_g_xy",
            rel_err_mat(&(prob.hess_g_xy)(x, y), &fd_jac_x(&gy_field, x, y)),
            threshold,
        );

        for (i, c) in prob.constraints.iter().enumerate() {
            let (fd_hx, fd_hy) = fd_scalar(&*c.h, x, y);
            report.record(&format!("grad_h{i}_x"), rel_err(&(c.grad_x)(x, y), &fd_hx), threshold);
            report.record(&format!("grad_h{i}_y"), rel_err(&(c.grad_y)(x, y), &fd_hy), threshold);
            let hy_field = |x: &[f64], y: &[f64]| (c.grad_y)(x, y);
            report.record(
                &format!("hess_h{i}_yy"),
                rel_err_mat(&(c.hess_yy)(x, y), &fd_jac_y(&hy_field, x, y)),
                threshold,
            );
            report.record(
                &format!("hess_h{i}_xy"),
                rel_err_mat(&(c.hess_xy)(x, y), &fd_jac_x(&hy_field, x, y)),
                threshold,
            );
        }
    }
    Ok(report)
}
