//! The log-barrier surrogate `g_t(x,y) = g(x,y) - t * sum_i log(-h_i(x,y))`
//! with its derivatives, plus calculators for every certified constant: the
//! boundary margin of the barrier minimizer, smoothness and Hessian-Lipschitz
//! bounds on margin-shrunk sets, and the strong-convexity modulus.

use crate::linalg::Matrix;
use crate::problem::{eval_constraints, BallRule, BilevelProblem, SettingClass, SmoothnessConstants};
use crate::{Error, Result};

/// Points with any `h_i` above this are treated as boundary violations; a
/// small negative threshold keeps projections that land exactly on a shrunk
/// boundary from misfiring.
pub const BOUNDARY_TOL: f64 = -1e-14;

/// A problem paired with a barrier parameter `t in (0, t_max]`.
#[derive(Clone)]
pub struct BarrierContext<'a> {
    pub t: f64,
    pub prob: &'a BilevelProblem,
}

impl<'a> BarrierContext<'a> {
    pub fn new(prob: &'a BilevelProblem, t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= prob.constants.t_max) {
            return Err(Error::Config(format!(
                "t = {t} outside (0, {}]",
                prob.constants.t_max
            )));
        }
        Ok(BarrierContext { t, prob })
    }
}

fn interior_constraints(ctx: &BarrierContext, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let h = eval_constraints(ctx.prob, x, y)?;
    let worst = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst >= BOUNDARY_TOL {
        return Err(Error::BoundaryViolation(worst));
    }
    Ok(h)
}

/// `g(x,y) - t * sum_i log(-h_i(x,y))`; requires a strictly interior point.
pub fn barrier_value(ctx: &BarrierContext, x: &[f64], y: &[f64]) -> Result<f64> {
    let h = interior_constraints(ctx, x, y)?;
    let g = (ctx.prob.g)(x, y);
    let bar: f64 = h.iter().map(|hi| (-hi).ln()).sum();
    Ok(g - ctx.t * bar)
}

/// `grad_y g + t * sum_i grad_y h_i / (-h_i)`.
pub fn barrier_grad_y(ctx: &BarrierContext, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let h = interior_constraints(ctx, x, y)?;
    let mut grad = (ctx.prob.grad_g_y)(x, y);
    for (hi, c) in h.iter().zip(&ctx.prob.constraints) {
        let gy = (c.grad_y)(x, y);
        let w = ctx.t / (-hi);
        for (g, v) in grad.iter_mut().zip(&gy) {
            *g += w * v;
        }
    }
    Ok(grad)
}

/// `hess_yy g + t * sum_i (hess_yy h_i / (-h_i) + grad_y h_i grad_y h_i^T / h_i^2)`.
pub fn barrier_hess_yy(ctx: &BarrierContext, x: &[f64], y: &[f64]) -> Result<Matrix> {
    let h = interior_constraints(ctx, x, y)?;
    let mut hess = (ctx.prob.hess_g_yy)(x, y);
    for (hi, c) in h.iter().zip(&ctx.prob.constraints) {
        let mut term = (c.hess_yy)(x, y);
        term.scale(ctx.t / (-hi));
        hess.add_assign(&term);
        let gy = (c.grad_y)(x, y);
        hess.add_assign(&Matrix::outer(&gy, &gy, ctx.t / (hi * hi)));
    }
    Ok(hess)
}

/// `hess_xy g + t * sum_i (hess_xy h_i / (-h_i) + grad_x h_i grad_y h_i^T / h_i^2)`
/// with shape `n x m`.
pub fn barrier_hess_xy(ctx: &BarrierContext, x: &[f64], y: &[f64]) -> Result<Matrix> {
    let h = interior_constraints(ctx, x, y)?;
    let mut hess = (ctx.prob.hess_g_xy)(x, y);
    for (hi, c) in h.iter().zip(&ctx.prob.constraints) {
        let mut term = (c.hess_xy)(x, y);
        term.scale(ctx.t / (-hi));
        hess.add_assign(&term);
        let gx = (c.grad_x)(x, y);
        let gy = (c.grad_y)(x, y);
        hess.add_assign(&Matrix::outer(&gx, &gy, ctx.t / (hi * hi)));
    }
    Ok(hess)
}

/// Certified distance-to-boundary of the barrier minimizer, given a Slater
/// slack `d`: `m = min(t d^2 / (4 R L_g + 4 R t_max k L_h), d / 2)`.
/// Monotone nondecreasing in both `t` and `d`.
pub fn compute_margin(t: f64, d: f64, c: &SmoothnessConstants) -> f64 {
    let denom = 4.0 * c.r * c.l_g + 4.0 * c.r * c.t_max * (c.k as f64) * c.l_h;
    (t * d * d / denom).min(d / 2.0)
}

/// Gradient-Lipschitz bound of the barrier objective on the margin-`m` shrunk
/// set: `lbar_g + t k lbar_h / m + t k l_h^2 / m^2`.
pub fn lipschitz_smooth_bound(t: f64, m: f64, c: &SmoothnessConstants) -> f64 {
    let k = c.k as f64;
    c.lbar_g + t * k * c.lbar_h / m + t * k * c.l_h * c.l_h / (m * m)
}

/// Hessian-Lipschitz bound on the margin-`m` shrunk set:
/// `lbarbar_g + t k (lbarbar_h/m + lbar_h l_h/m^2 + 2 l_h^3/m^3 + 2 l_h lbar_h/m^2)`.
pub fn hessian_lipschitz_bound(t: f64, m: f64, c: &SmoothnessConstants) -> f64 {
    let k = c.k as f64;
    c.lbarbar_g
        + t * k
            * (c.lbarbar_h / m
                + c.lbar_h * c.l_h / (m * m)
                + 2.0 * c.l_h.powi(3) / (m * m * m)
                + 2.0 * c.l_h * c.lbar_h / (m * m))
}

/// Strong-convexity modulus of the barrier objective in `y`.
///
/// Strongly convex setting: `mu_g`. Linear setting: `t sigma / h_bound^2`,
/// requiring both constants; when the norm-ball augmentation is active its
/// curvature contribution is taken as a further lower bound (max of the two).
/// The conservative ball value is `2t / R^2`; `BallRule::AsPublished` restores
/// the looser `2t / R`.
pub fn strong_convexity_bound(
    setting: SettingClass,
    t: f64,
    c: &SmoothnessConstants,
    ball: Option<BallRule>,
) -> Result<f64> {
    match setting {
        SettingClass::StronglyConvex => Ok(c.mu_g),
        SettingClass::LinearLP => {
            let base = if c.sigma > 0.0 && c.h_bound > 0.0 {
                Some(t * c.sigma / (c.h_bound * c.h_bound))
            } else {
                None
            };
            let from_ball = ball.map(|rule| match rule {
                BallRule::Conservative => 2.0 * t / (c.r * c.r),
                BallRule::AsPublished => 2.0 * t / c.r,
            });
            match (base, from_ball) {
                (Some(a), Some(b)) => Ok(a.max(b)),
                (Some(a), None) => Ok(a),
                (None, Some(b)) => Ok(b),
                (None, None) => Err(Error::MissingConstant(
                    "sigma/h_bound unset and norm-ball augmentation off".into(),
                )),
            }
        }
    }
}
