//! Independent brute-force oracles for the lower level: grid search with
//! derivative-free polish, KKT enumeration over active subsets, polyhedral
//! vertex enumeration, multiplier recovery, and the positioning constant for
//! linear lower levels. None of this shares code paths with the solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, Matrix, Vector};
use crate::problem::{eval_constraints, BilevelProblem, SettingClass};
use crate::{Error, Result};

/// How [`brute_force_lower`] locates the minimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BruteForceMode {
    /// Exhaustive grid over `[-R, R]^m` at the given resolution per axis,
    /// followed by a derivative-free coordinate polish. Dimension at most 3.
    Grid(usize),
    /// KKT solves over every active subset (Newton per subset), global
    /// minimizer picked among feasible candidates with nonnegative
    /// multipliers. Needs `k <= 12`.
    ActiveSet,
    /// Vertex enumeration for affine constraints, optionally with one
    /// norm-ball constraint. Needs `k <= 12` and a compact feasible set.
    Vertex,
}

/// Certified lower-level minimizer with KKT data.
#[derive(Clone, Debug)]
pub struct KktCertificate {
    pub y_star: Vector,
    pub g_value: f64,
    /// Indices of constraints active at `y_star`.
    pub active: Vec<usize>,
    /// Full-length multiplier vector (zero off the active set).
    pub lambdas: Vector,
    /// `||grad_y g + sum lambda_i grad_y h_i||` at `y_star`.
    pub stationarity_residual: f64,
}

const FEAS_TOL: f64 = 1e-8;

/// Independently locates the lower-level minimizer at `x` (barrier-free
/// original problem) and recovers its KKT certificate.
pub fn brute_force_lower(
    prob: &BilevelProblem,
    x: &[f64],
    mode: BruteForceMode,
) -> Result<KktCertificate> {
    let y_star = match mode {
        BruteForceMode::Grid(res) => grid_minimizer(prob, x, res)?,
        BruteForceMode::ActiveSet => active_set_minimizer(prob, x)?,
        BruteForceMode::Vertex => {
            let verts = enumerate_vertices(prob, x)?;
            verts
                .into_iter()
                .min_by(|a, b| {
                    (prob.g)(x, a).partial_cmp(&(prob.g)(x, b)).expect("finite g")
                })
                .ok_or(Error::EmptySet)?
        }
    };
    certify(prob, x, y_star)
}

fn certify(prob: &BilevelProblem, x: &[f64], y_star: Vector) -> Result<KktCertificate> {
    let h = eval_constraints(prob, x, &y_star)?;
    let active: Vec<usize> =
        (0..prob.k()).filter(|&i| h[i] >= -1e-6 * (1.0 + h[i].abs())).collect();
    let (lambdas, residual) = kkt_multipliers(prob, x, &y_star, 1e-6)?;
    Ok(KktCertificate {
        g_value: (prob.g)(x, &y_star),
        y_star,
        active,
        lambdas,
        stationarity_residual: residual,
    })
}

/// Lagrange multipliers at a candidate minimizer by nonnegative least squares
/// over subsets of the near-active constraints (those with `h_i >= -act_tol`).
/// Errors with [`Error::ResidualTooLarge`] when no subset brings the KKT
/// stationarity residual below `1e-6 * (1 + ||grad_y g||)`.
pub fn kkt_multipliers(
    prob: &BilevelProblem,
    x: &[f64],
    y_star: &[f64],
    act_tol: f64,
) -> Result<(Vector, f64)> {
    let h = eval_constraints(prob, x, y_star)?;
    let grad_g = (prob.grad_g_y)(x, y_star);
    let active: Vec<usize> = (0..prob.k()).filter(|&i| h[i] >= -act_tol).collect();
    if active.len() > 16 {
        return Err(Error::OracleFailure("active set too large".into()));
    }
    let grads: Vec<Vector> =
        active.iter().map(|&i| (prob.constraints[i].grad_y)(x, y_star)).collect();

    let mut best: Option<(Vector, f64, u32)> = None; // lambdas, residual, cardinality
    for mask in 0u32..(1u32 << active.len()) {
        let subset: Vec<usize> =
            (0..active.len()).filter(|j| mask >> j & 1 == 1).collect();
        let lam_s = if subset.is_empty() {
            Vec::new()
        } else {
            // Normal equations for min ||grad_g + sum lambda grad_h||.
            let s = subset.len();
            let mut gram = Matrix::zeros(s, s);
            let mut rhs = vec![0.0; s];
            for (p, &jp) in subset.iter().enumerate() {
                for (q, &jq) in subset.iter().enumerate() {
                    gram[(p, q)] = linalg::dot(&grads[jp], &grads[jq]);
                }
                rhs[p] = -linalg::dot(&grads[jp], &grad_g);
            }
            match linalg::solve_spd(&gram, &rhs) {
                Ok(l) => l,
                Err(_) => continue, // dependent gradients; a sub-subset covers it
            }
        };
        if lam_s.iter().any(|&l| l < -1e-9) {
            continue;
        }
        let mut resid_vec = grad_g.clone();
        for (p, &jp) in subset.iter().enumerate() {
            resid_vec = linalg::axpy(&resid_vec, lam_s[p].max(0.0), &grads[jp]);
        }
        let residual = linalg::norm(&resid_vec);
        let card = mask.count_ones();
        let better = match &best {
            None => true,
            Some((_, r, c)) => residual < r - 1e-12 || (residual < r + 1e-12 && card < *c),
        };
        if better {
            let mut full = vec![0.0; prob.k()];
            for (p, &jp) in subset.iter().enumerate() {
                full[active[jp]] = lam_s[p].max(0.0);
            }
            best = Some((full, residual, card));
        }
    }
    let (lambdas, residual, _) = best.ok_or(Error::EmptySet)?;
    if residual > 1e-6 * (1.0 + linalg::norm(&grad_g)) {
        return Err(Error::ResidualTooLarge(residual));
    }
    Ok((lambdas, residual))
}

/// Original (unbarriered) hyperfunction value `min f(x, y)` over the
/// lower-level optimal set. Strongly convex lower levels have a unique
/// minimizer; linear ones may have a face of minimizers, sampled by convex
/// combinations of the optimal vertices.
pub fn brute_force_hyperfunction(prob: &BilevelProblem, x: &[f64], seed: u64) -> Result<f64> {
    match prob.setting {
        SettingClass::StronglyConvex => {
            let cert = brute_force_lower(prob, x, BruteForceMode::ActiveSet)?;
            Ok((prob.f)(x, &cert.y_star))
        }
        SettingClass::LinearLP => {
            let verts = enumerate_vertices(prob, x)?;
            let g_star = verts
                .iter()
                .map(|v| (prob.g)(x, v))
                .fold(f64::INFINITY, f64::min);
            if !g_star.is_finite() {
                return Err(Error::EmptySet);
            }
            let opt: Vec<&Vector> = verts
                .iter()
                .filter(|v| (prob.g)(x, v) <= g_star + 1e-9 * (1.0 + g_star.abs()))
                .collect();
            let mut best = opt.iter().map(|v| (prob.f)(x, v)).fold(f64::INFINITY, f64::min);
            if opt.len() > 1 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..200 {
                    let mut weights: Vec<f64> =
                        (0..opt.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let total: f64 = weights.iter().sum();
                    for w in &mut weights {
                        *w /= total;
                    }
                    let mut y = vec![0.0; prob.m];
                    for (w, v) in weights.iter().zip(&opt) {
                        y = linalg::axpy(&y, *w, v);
                    }
                    best = best.min((prob.f)(x, &y));
                }
            }
            Ok(best)
        }
    }
}

/// Positioning constant of a linear lower level at `x`: the smallest
/// normalized objective gap `(g(v) - g*) / (||v - y*|| ||grad_y g||)` over
/// non-optimal vertices `v`. Errors with [`Error::NonUniqueOptimum`] when the
/// optimal vertex is not unique.
pub fn estimate_tau(prob: &BilevelProblem, x: &[f64]) -> Result<f64> {
    let verts = enumerate_vertices(prob, x)?;
    if verts.is_empty() {
        return Err(Error::EmptySet);
    }
    let gvals: Vec<f64> = verts.iter().map(|v| (prob.g)(x, v)).collect();
    let g_star = gvals.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + g_star.abs());
    let opt: Vec<usize> = (0..verts.len()).filter(|&i| gvals[i] <= g_star + tol).collect();
    if opt.len() != 1 {
        return Err(Error::NonUniqueOptimum);
    }
    let y_star = &verts[opt[0]];
    let grad_norm = linalg::norm(&(prob.grad_g_y)(x, y_star));
    if grad_norm == 0.0 {
        return Err(Error::OracleFailure("zero lower objective gradient".into()));
    }
    let mut tau = f64::INFINITY;
    for (i, v) in verts.iter().enumerate() {
        if i == opt[0] {
            continue;
        }
        let d = linalg::dist(v, y_star);
        if d > 1e-12 {
            tau = tau.min((gvals[i] - g_star) / (d * grad_norm));
        }
    }
    if tau.is_finite() {
        Ok(tau)
    } else {
        Err(Error::OracleFailure("no non-optimal vertices".into()))
    }
}

// ---- grid search ----

fn grid_minimizer(prob: &BilevelProblem, x: &[f64], res: usize) -> Result<Vector> {
    if prob.m > 3 {
        return Err(Error::OracleFailure("grid oracle limited to m <= 3".into()));
    }
    if res < 2 {
        return Err(Error::Config("grid resolution must be >= 2".into()));
    }
    let r = prob.constants.r;
    let spacing = 2.0 * r / (res - 1) as f64;
    let mut best: Option<(Vector, f64)> = None;
    let mut idx = vec![0usize; prob.m];
    loop {
        let y: Vector = idx.iter().map(|&i| -r + spacing * i as f64).collect();
        let h = eval_constraints(prob, x, &y)?;
        if h.iter().all(|&v| v <= FEAS_TOL) {
            let g = (prob.g)(x, &y);
            if best.as_ref().map_or(true, |(_, b)| g < *b) {
                best = Some((y, g));
            }
        }
        // odometer increment
        let mut c = 0;
        loop {
            idx[c] += 1;
            if idx[c] < res {
                break;
            }
            idx[c] = 0;
            c += 1;
            if c == prob.m {
                let (y, _) = best.ok_or(Error::EmptySet)?;
                return Ok(coordinate_polish(prob, x, y, spacing));
            }
        }
    }
}

/// Derivative-free polish: axis moves with a shrinking step, keeping feasible
/// improvements, from the grid spacing down to 1e-11.
fn coordinate_polish(prob: &BilevelProblem, x: &[f64], mut y: Vector, step0: f64) -> Vector {
    let mut step = step0;
    let mut g = (prob.g)(x, &y);
    while step > 1e-11 {
        let mut improved = false;
        for j in 0..y.len() {
            for dir in [1.0, -1.0] {
                let mut cand = y.clone();
                cand[j] += dir * step;
                let feasible = eval_constraints(prob, x, &cand)
                    .map(|h| h.iter().all(|&v| v <= FEAS_TOL))
                    .unwrap_or(false);
                if feasible {
                    let gc = (prob.g)(x, &cand);
                    if gc < g - 1e-15 * (1.0 + g.abs()) {
                        y = cand;
                        g = gc;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    y
}

// ---- KKT active-set enumeration ----

fn active_set_minimizer(prob: &BilevelProblem, x: &[f64]) -> Result<Vector> {
    let k = prob.k();
    if k > 12 {
        return Err(Error::OracleFailure("active-set oracle limited to k <= 12".into()));
    }
    let mut best: Option<(Vector, f64)> = None;
    for mask in 0u32..(1u32 << k) {
        if mask.count_ones() as usize > prob.m {
            continue;
        }
        let subset: Vec<usize> = (0..k).filter(|j| mask >> j & 1 == 1).collect();
        if let Some(y) = kkt_newton(prob, x, &subset) {
            let h = match eval_constraints(prob, x, &y) {
                Ok(h) => h,
                Err(_) => continue,
            };
            if h.iter().any(|&v| v > FEAS_TOL) {
                continue;
            }
            let g = (prob.g)(x, &y);
            if best.as_ref().map_or(true, |(_, b)| g < *b) {
                best = Some((y, g));
            }
        }
    }
    best.map(|(y, _)| y).ok_or_else(|| Error::OracleFailure("no KKT point found".into()))
}

/// Damped Newton on the KKT equations with the given constraints forced
/// active. Returns the primal point only when the residual converges and the
/// recovered multipliers are nonnegative.
fn kkt_newton(prob: &BilevelProblem, x: &[f64], subset: &[usize]) -> Option<Vector> {
    let m = prob.m;
    let s = subset.len();
    let dim = m + s;
    let mut y = vec![0.0; m];
    let mut lam = vec![1.0; s];

    let residual = |y: &Vector, lam: &Vector| -> Option<Vector> {
        let mut f = (prob.grad_g_y)(x, y);
        for (p, &i) in subset.iter().enumerate() {
            f = linalg::axpy(&f, lam[p], &(prob.constraints[i].grad_y)(x, y));
        }
        for &i in subset {
            f.push((prob.constraints[i].h)(x, y));
        }
        if f.iter().all(|v| v.is_finite()) {
            Some(f)
        } else {
            None
        }
    };

    let mut res = residual(&y, &lam)?;
    let mut res_norm = linalg::norm(&res);
    for _ in 0..100 {
        if res_norm <= 1e-12 * (1.0 + res_norm) + 1e-12 {
            break;
        }
        let mut jac = Matrix::zeros(dim, dim);
        let mut hess = (prob.hess_g_yy)(x, &y);
        for (p, &i) in subset.iter().enumerate() {
            let mut hi = (prob.constraints[i].hess_yy)(x, &y);
            hi.scale(lam[p]);
            hess.add_assign(&hi);
        }
        for i in 0..m {
            for j in 0..m {
                jac[(i, j)] = hess[(i, j)];
            }
        }
        for (p, &i) in subset.iter().enumerate() {
            let gy = (prob.constraints[i].grad_y)(x, &y);
            for j in 0..m {
                jac[(j, m + p)] = gy[j];
                jac[(m + p, j)] = gy[j];
            }
        }
        let rhs = linalg::scaled(&res, -1.0);
        let delta = solve_lu(&jac, &rhs)?;
        // Backtracking on the residual norm.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let y_new = linalg::axpy(&y, alpha, &delta[..m]);
            let lam_new = linalg::axpy(&lam, alpha, &delta[m..]);
            if let Some(r_new) = residual(&y_new, &lam_new) {
                let n_new = linalg::norm(&r_new);
                if n_new < res_norm * (1.0 - 1e-4 * alpha) + 1e-16 {
                    y = y_new;
                    lam = lam_new;
                    res = r_new;
                    res_norm = n_new;
                    accepted = true;
                    break;
                }
            }
            alpha /= 2.0;
        }
        if !accepted {
            return None;
        }
    }
    if res_norm > 1e-8 || lam.iter().any(|&l| l < -1e-8) {
        return None;
    }
    Some(y)
}

// ---- vertex enumeration ----

/// Vertices of the lower feasible set at `x`. All constraints must be affine
/// in `y`, except that a single quadratic norm ball `||y||^2 <= r2` is
/// supported.
fn enumerate_vertices(prob: &BilevelProblem, x: &[f64]) -> Result<Vec<Vector>> {
    let k = prob.k();
    if k > 12 {
        return Err(Error::OracleFailure("vertex oracle limited to k <= 12".into()));
    }
    let m = prob.m;
    let zero = vec![0.0; m];
    let mut affine: Vec<(Vector, f64)> = Vec::new(); // a^T y + c <= 0
    let mut ball_r2: Option<f64> = None;
    for c in &prob.constraints {
        if c.affine_in_y {
            affine.push(((c.grad_y)(x, &zero), (c.h)(x, &zero)));
        } else if ball_r2.is_none() {
            // Norm ball centred at the origin: h(x, 0) = -r^2.
            ball_r2 = Some(-(c.h)(x, &zero));
        } else {
            return Err(Error::OracleFailure(
                "vertex oracle supports at most one non-affine constraint".into(),
            ));
        }
    }

    let feasible = |y: &Vector| -> bool {
        eval_constraints(prob, x, y)
            .map(|h| h.iter().all(|&v| v <= FEAS_TOL))
            .unwrap_or(false)
    };
    let mut verts: Vec<Vector> = Vec::new();
    let push = |y: Vector, verts: &mut Vec<Vector>| {
        if feasible(&y) && !verts.iter().any(|v| linalg::dist(v, &y) <= 1e-9) {
            verts.push(y);
        }
    };

    // Full-rank intersections of m affine boundaries.
    for mask in 0u32..(1u32 << affine.len()) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let rows: Vec<usize> = (0..affine.len()).filter(|j| mask >> j & 1 == 1).collect();
        let mut a = Matrix::zeros(m, m);
        let mut b = vec![0.0; m];
        for (p, &j) in rows.iter().enumerate() {
            for q in 0..m {
                a[(p, q)] = affine[j].0[q];
            }
            b[p] = -affine[j].1;
        }
        if let Some(y) = solve_lu(&a, &b) {
            push(y, &mut verts);
        }
    }

    // Intersections of m-1 affine boundaries with the ball surface.
    if let Some(r2) = ball_r2 {
        for mask in 0u32..(1u32 << affine.len()) {
            if mask.count_ones() as usize != m - 1 {
                continue;
            }
            let rows: Vec<Vector> = (0..affine.len())
                .filter(|j| mask >> j & 1 == 1)
                .map(|j| affine[j].0.clone())
                .collect();
            let b: Vec<f64> = (0..affine.len())
                .filter(|j| mask >> j & 1 == 1)
                .map(|j| -affine[j].1)
                .collect();
            let Some((p, v)) = line_through(&rows, &b, m) else { continue };
            // ||p + s v||^2 = r2, with ||v|| = 1.
            let pv = linalg::dot(&p, &v);
            let disc = pv * pv - (linalg::dot(&p, &p) - r2);
            if disc < 0.0 {
                continue;
            }
            for sign in [1.0, -1.0] {
                let s = -pv + sign * disc.sqrt();
                push(linalg::axpy(&p, s, &v), &mut verts);
            }
        }
    }
    Ok(verts)
}

/// Solution line of an underdetermined full-rank system `A y = b` with `m - 1`
/// rows: the minimum-norm particular solution and a unit null direction.
fn line_through(rows: &[Vector], b: &[f64], m: usize) -> Option<(Vector, Vector)> {
    if rows.is_empty() {
        // Whole space; only sensible for m = 1.
        return if m == 1 { Some((vec![0.0], vec![1.0])) } else { None };
    }
    let r = rows.len();
    let mut gram = Matrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            gram[(i, j)] = linalg::dot(&rows[i], &rows[j]);
        }
    }
    let w = linalg::solve_spd(&gram, b).ok()?;
    let mut p = vec![0.0; m];
    for (wi, row) in w.iter().zip(rows) {
        p = linalg::axpy(&p, *wi, row);
    }
    // Null direction by Gram-Schmidt against the row space.
    let mut basis: Vec<Vector> = Vec::new();
    for row in rows {
        let mut u = row.clone();
        for e in &basis {
            u = linalg::axpy(&u, -linalg::dot(&u, e), e);
        }
        let n = linalg::norm(&u);
        if n < 1e-10 {
            return None; // dependent rows
        }
        basis.push(linalg::scaled(&u, 1.0 / n));
    }
    let mut best: Option<Vector> = None;
    let mut best_norm = 1e-8;
    for j in 0..m {
        let mut u = vec![0.0; m];
        u[j] = 1.0;
        for e in &basis {
            u = linalg::axpy(&u, -linalg::dot(&u, e), e);
        }
        let n = linalg::norm(&u);
        if n > best_norm {
            best_norm = n;
            best = Some(linalg::scaled(&u, 1.0 / n));
        }
    }
    best.map(|v| (p, v))
}

/// Dense LU solve with partial pivoting for the small indefinite systems the
/// oracles assemble. Returns `None` on (near-)singularity.
fn solve_lu(a: &Matrix, b: &[f64]) -> Option<Vector> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return None;
    }
    let mut lu: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    let mut x: Vector = b.to_vec();
    let scale = a.max_abs().max(1.0);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, lu[r][col].abs()))
            .max_by(|p, q| p.1.partial_cmp(&q.1).expect("finite pivot"))?;
        if pivot <= 1e-12 * scale {
            return None;
        }
        lu.swap(col, pivot_row);
        x.swap(col, pivot_row);
        for r in (col + 1)..n {
            let factor = lu[r][col] / lu[col][col];
            lu[r][col] = 0.0;
            for cc in (col + 1)..n {
                lu[r][cc] -= factor * lu[col][cc];
            }
            x[r] -= factor * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= lu[i][j] * x[j];
        }
        x[i] = s / lu[i][i];
    }
    Some(x)
}
