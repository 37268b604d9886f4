//! Outer loop at fixed barrier parameter `t`: certified inner accuracy,
//! implicit hypergradient, adaptive stepsize, projected step on the upper set,
//! and the projected-gradient stationarity measure.

use std::time::Instant;

use crate::barrier::{compute_margin, hessian_lipschitz_bound, BarrierContext};
use crate::hypergrad::{approx_hypergradient, hypergradient_error_bound};
use crate::linalg::{self, Vector};
use crate::lower::{margin_stage, solve_lower_staged, InnerVariant};
use crate::problem::{project_upper, SmoothnessConstants};
use crate::Result;

/// One outer iteration record.
#[derive(Clone, Debug)]
pub struct TraceRow {
    pub s: usize,
    pub t: f64,
    pub d_s: f64,
    pub m_s: f64,
    pub eta_s: f64,
    pub grad_norm: f64,
    pub stationarity: f64,
    pub phi_tilde: f64,
    pub inner_iters: usize,
    pub wall_ms: f64,
}

/// Append-only record of an outer run.
#[derive(Clone, Debug, Default)]
pub struct OuterTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    Failed(String),
}

/// Outcome of [`run_bfbm`]: the best iterate by stationarity, with the trace.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub x_out: Vector,
    pub best_stationarity: f64,
    pub trace: OuterTrace,
    pub status: RunStatus,
}

/// Local Lipschitz-smoothness estimate of the barrier hyperfunction around
/// the current iterate, valid while steps stay within `d_s / (2 L_h)`: the
/// error-bound constant evaluated at the margin for slack `d_s / 2`, times
/// `(1 + P / mu)`.
pub fn local_phi_lipschitz(t: f64, d_s: f64, c: &SmoothnessConstants, mu: f64) -> f64 {
    let m_loc = compute_margin(t, d_s / 2.0, c);
    let k = c.k as f64;
    let p = c.lbar_g + t * k * c.lbar_h / m_loc + t * k * c.l_h * c.l_h / (m_loc * m_loc);
    let hlip = hessian_lipschitz_bound(t, m_loc, c);
    let lprime = c.lbar_f + c.lbar_f * p / mu + c.l_f * hlip * p / (mu * mu) + c.l_f * hlip / mu;
    lprime * (1.0 + p / mu)
}

/// `eta_s = min(1, d_s / (2 L_h ||grad||), 1 / L_phi)`; the middle branch
/// keeps the step inside the region where the local smoothness estimate is
/// valid, and is +infinity at a zero gradient.
pub fn stepsize(d_s: f64, grad_norm: f64, l_phi_s: f64, c: &SmoothnessConstants) -> f64 {
    let localization = if grad_norm > 0.0 {
        d_s / (2.0 * c.l_h * grad_norm)
    } else {
        f64::INFINITY
    };
    1.0f64.min(localization).min(1.0 / l_phi_s)
}

/// Projected-gradient residual `(1 / eta_s) * ||x_s - x_next||`.
pub fn stationarity(x_s: &[f64], x_next: &[f64], eta_s: f64) -> f64 {
    linalg::dist(x_s, x_next) / eta_s
}

/// Options for [`run_bfbm_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct OuterOptions {
    pub variant: InnerVariant,
}

/// Runs the outer loop to target stationarity `eps` with at most `max_outer`
/// iterations. The `seed` is recorded for interface stability; every stage of
/// the run is deterministic, so reruns with any fixed inputs are bit-identical.
pub fn run_bfbm(
    ctx: &BarrierContext,
    x0: &[f64],
    eps: f64,
    max_outer: usize,
    seed: u64,
) -> RunResult {
    run_bfbm_with(ctx, x0, eps, max_outer, seed, OuterOptions::default())
}

pub fn run_bfbm_with(
    ctx: &BarrierContext,
    x0: &[f64],
    eps: f64,
    max_outer: usize,
    _seed: u64,
    opts: OuterOptions,
) -> RunResult {
    let c = ctx.prob.constants;
    let mut trace = OuterTrace::default();
    let mut best_stat = f64::INFINITY;

    let mut x = match project_upper(&ctx.prob.upper_set, x0) {
        Ok(x) => x,
        Err(e) => {
            return RunResult {
                x_out: x0.to_vec(),
                best_stationarity: f64::INFINITY,
                trace,
                status: RunStatus::Failed(e.to_string()),
            }
        }
    };
    let mut x_out = x.clone();
    let mut warm: Option<Vector> = None;
    let mut status = RunStatus::BudgetExhausted;

    for s in 0..max_outer {
        let started = Instant::now();
        let step_result: Result<(TraceRow, Vector, Vector)> = (|| {
            // Margin first: the inner accuracy schedule needs m_s before the
            // accelerated loop that will be run at that accuracy.
            let stage = margin_stage(ctx, &x)?;
            let lprime = hypergradient_error_bound(ctx.t, stage.m_s, &c, stage.mu);
            let eps_s = eps / (4.0 * lprime);
            let sol = solve_lower_staged(ctx, &x, &stage, eps_s, warm.as_deref(), opts.variant)?;
            let hg = approx_hypergradient(ctx, &x, &sol)?;
            let grad_norm = linalg::norm(&hg.grad);
            let l_loc = local_phi_lipschitz(ctx.t, sol.d_s, &c, sol.mu);
            let eta = stepsize(sol.d_s, grad_norm, l_loc, &c);
            let x_next =
                project_upper(&ctx.prob.upper_set, &linalg::axpy(&x, -eta, &hg.grad))?;
            let stat = stationarity(&x, &x_next, eta);
            let phi_tilde = (ctx.prob.f)(&x, &sol.y_tilde);
            let row = TraceRow {
                s,
                t: ctx.t,
                d_s: sol.d_s,
                m_s: sol.m_s,
                eta_s: eta,
                grad_norm,
                stationarity: stat,
                phi_tilde,
                inner_iters: sol.inner_iters,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            };
            Ok((row, x_next, sol.y_tilde))
        })();
        match step_result {
            Ok((row, x_next, y_tilde)) => {
                // First occurrence wins ties so the output is reproducible.
                if row.stationarity < best_stat {
                    best_stat = row.stationarity;
                    x_out = x.clone();
                }
                let stat = row.stationarity;
                trace.rows.push(row);
                warm = Some(y_tilde);
                x = x_next;
                if stat <= eps {
                    status = RunStatus::Converged;
                    break;
                }
            }
            Err(e) => {
                status = RunStatus::Failed(e.to_string());
                break;
            }
        }
    }
    RunResult { x_out, best_stationarity: best_stat, trace, status }
}
