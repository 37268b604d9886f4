//! Implicit hypergradient of the barrier hyperfunction `f(x, y_t*(x))` at an
//! inexact lower solution, the certified error constant that prices the
//! inexactness, and an independent finite-difference oracle.

use crate::barrier::{
    barrier_hess_xy, barrier_hess_yy, hessian_lipschitz_bound, BarrierContext,
};
use crate::linalg::{self, solve_spd, Matrix, Vector};
use crate::lower::{solve_lower, LowerSolution};
use crate::problem::SmoothnessConstants;
use crate::{Error, Result};

/// Hypergradient with diagnostics.
#[derive(Clone, Debug)]
pub struct HypergradResult {
    /// `grad_x f - hess_xy * hess_yy^{-1} * grad_y f` at `(x, y_tilde)`.
    pub grad: Vector,
    /// `residual_bound * L'`, the certified gradient error from the inexact
    /// lower solution.
    pub error_bound: f64,
    pub grad_f_x: Vector,
    pub grad_f_y: Vector,
    /// `n x m` mixed barrier Hessian.
    pub hess_xy: Matrix,
    /// Solution of `hess_yy v = grad_y f`, kept for conditioning diagnostics.
    pub hess_solve: Vector,
}

/// Lipschitz constant of the hypergradient with respect to lower-solution
/// error, on the margin-`m_s` shrunk set:
/// `lbar_f + lbar_f P / mu + l_f hlip P / mu^2 + l_f hlip / mu` with
/// `P = lbar_g + t k lbar_h / m_s + t k l_h^2 / m_s^2` and `hlip` the barrier
/// Hessian-Lipschitz bound.
pub fn hypergradient_error_bound(t: f64, m_s: f64, c: &SmoothnessConstants, mu: f64) -> f64 {
    let k = c.k as f64;
    let p = c.lbar_g + t * k * c.lbar_h / m_s + t * k * c.l_h * c.l_h / (m_s * m_s);
    let hlip = hessian_lipschitz_bound(t, m_s, c);
    c.lbar_f + c.lbar_f * p / mu + c.l_f * hlip * p / (mu * mu) + c.l_f * hlip / mu
}

/// Implicit hypergradient at the inexact lower solution carried by `sol`.
pub fn approx_hypergradient(
    ctx: &BarrierContext,
    x: &[f64],
    sol: &LowerSolution,
) -> Result<HypergradResult> {
    let y = &sol.y_tilde;
    let (grad_f_x, grad_f_y) = (ctx.prob.grad_f)(x, y);
    let hess_yy = barrier_hess_yy(ctx, x, y)?;
    let hess_xy = barrier_hess_xy(ctx, x, y)?;
    let v = solve_spd(&hess_yy, &grad_f_y)?;
    let correction = hess_xy.matvec(&v);
    let grad = linalg::sub(&grad_f_x, &correction);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::OracleFailure("hypergradient".into()));
    }
    let error_bound = sol.residual_bound
        * hypergradient_error_bound(ctx.t, sol.m_s, &ctx.prob.constants, sol.mu);
    Ok(HypergradResult { grad, error_bound, grad_f_x, grad_f_y, hess_xy, hess_solve: v })
}

/// Central finite differences of the barrier hyperfunction, each evaluation
/// solving the lower level to accuracy `inner_eps` (which should be at most
/// `step^3` so solver noise stays below truncation error). Lower solves are
/// warm started along the stencil.
pub fn fd_hyperfunction_grad(
    ctx: &BarrierContext,
    x: &[f64],
    step: f64,
    inner_eps: f64,
) -> Result<Vector> {
    if step <= 0.0 {
        return Err(Error::Config(format!("step {step} must be positive")));
    }
    let mut warm: Option<Vector> = None;
    let mut phi = |xq: &[f64]| -> Result<f64> {
        if !ctx.prob.upper_set.contains(xq, 0.0) {
            return Err(Error::OutsideUpperSet);
        }
        let sol = solve_lower(ctx, xq, inner_eps, warm.as_deref())?;
        let v = (ctx.prob.f)(xq, &sol.y_tilde);
        warm = Some(sol.y_tilde);
        Ok(v)
    };
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += step;
        xm[i] -= step;
        grad[i] = (phi(&xp)? - phi(&xm)?) / (2.0 * step);
    }
    Ok(grad)
}
