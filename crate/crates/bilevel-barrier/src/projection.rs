//! Geometric oracles over margin-shrunk feasible sets
//! `Y_d(x) = { y : h_i(x, y) <= -d for all i }`: feasibility probing (with the
//! Slater-slack halving search) and Euclidean projection.

use crate::linalg::{self, Vector};
use crate::problem::{eval_constraints, BilevelProblem};
use crate::{Error, Result};

/// Membership slack: a point counts as inside when
/// `max_i h_i(x,y) <= -margin + MEMBER_TOL`.
pub const MEMBER_TOL: f64 = 1e-12;

/// A fixed upper iterate `x` paired with a shrink margin.
pub struct ShrunkSet<'a> {
    pub prob: &'a BilevelProblem,
    pub x: Vector,
    pub margin: f64,
    /// A strictly feasible anchor (typically the probe's witness); used to
    /// restore strict membership after approximate projections.
    pub witness: Option<Vector>,
}

impl<'a> ShrunkSet<'a> {
    pub fn new(prob: &'a BilevelProblem, x: &[f64], margin: f64) -> Self {
        ShrunkSet { prob, x: x.to_vec(), margin, witness: None }
    }

    /// `max_i h_i(x, y) + margin`; nonpositive iff `y` is a member.
    pub fn violation(&self, y: &[f64]) -> Result<f64> {
        let h = eval_constraints(self.prob, &self.x, y)?;
        Ok(h.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + self.margin)
    }

    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        Ok(self.violation(y)? <= MEMBER_TOL)
    }

    fn all_affine(&self) -> bool {
        self.prob.constraints.iter().all(|c| c.affine_in_y)
    }

    /// Halfspace data `a_i^T y <= b_i` equivalent to `h_i(x,y) <= -margin`
    /// for affine constraints: `a_i = grad_y h_i(x, 0)`,
    /// `b_i = -margin - h_i(x, 0)`.
    fn halfspaces(&self) -> Vec<(Vector, f64)> {
        let zero = vec![0.0; self.prob.m];
        self.prob
            .constraints
            .iter()
            .map(|c| {
                let a = (c.grad_y)(&self.x, &zero);
                let b = -self.margin - (c.h)(&self.x, &zero);
                (a, b)
            })
            .collect()
    }
}

/// Searches for a member of the shrunk set.
///
/// All-affine constraints: cyclic projections onto the halfspaces (exact
/// phase-1). Otherwise: subgradient descent on `F(y) = max_i (h_i + margin)`
/// with Polyak-style steps, started from the origin. Returns `None` when the
/// budget is exhausted with the best violation still above 1e-9.
pub fn feasibility_probe(set: &ShrunkSet, budget: usize) -> Result<Option<Vector>> {
    let mut y = set
        .witness
        .clone()
        .unwrap_or_else(|| vec![0.0; set.prob.m]);
    if set.violation(&y)? <= 0.0 {
        return Ok(Some(y));
    }
    if set.all_affine() {
        // Cyclic projections converge to the intersection but typically to a
        // boundary point, approached from outside, so the strict membership
        // test would never fire on sets with thin interior. Aim at delta-
        // tightened halfspaces instead (any of their points clears the real
        // set by delta) and relax delta when the tighter set looks empty.
        let hs = set.halfspaces();
        let deltas = [1e-2, 1e-4, 1e-8, 0.0].map(|s| s * set.margin.max(1e-3));
        let start = y.clone();
        for delta in deltas {
            y = start.clone();
            for _ in 0..budget / deltas.len() {
                let mut moved = false;
                for (a, b) in &hs {
                    let viol = linalg::dot(a, &y) - (b - delta);
                    if viol > 0.0 {
                        let nn = linalg::dot(a, a);
                        if nn > 0.0 {
                            y = linalg::axpy(&y, -viol / nn, a);
                            moved = true;
                        }
                    }
                }
                if set.violation(&y)? <= 0.0 {
                    return Ok(Some(y));
                }
                if !moved {
                    break;
                }
            }
        }
        return Ok(None);
    }
    // Smooth case: subgradient of the max is the gradient of an argmax row.
    let mut best = y.clone();
    let mut best_f = set.violation(&y)?;
    for iter in 0..budget {
        let h = eval_constraints(set.prob, &set.x, &y)?;
        let (imax, hmax) = h
            .iter()
            .cloned()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let f = hmax + set.margin;
        if f < best_f {
            best_f = f;
            best = y.clone();
        }
        if f <= 0.0 {
            return Ok(Some(y));
        }
        let g = (set.prob.constraints[imax].grad_y)(&set.x, &y);
        let gn2 = linalg::dot(&g, &g);
        if gn2 == 0.0 {
            break;
        }
        // Polyak step toward F = 0, with a diminishing safeguard so cycling
        // between near-active constraints still makes progress.
        let step = f / gn2 * (1.0 + 1.0 / (1.0 + iter as f64));
        y = linalg::axpy(&y, -step, &g);
    }
    if best_f <= 1e-9 {
        Ok(Some(best))
    } else {
        Ok(None)
    }
}

/// Halving search for the largest Slater slack in `{1, 1/2, 1/4, ...}` whose
/// shrunk set is nonempty; returns the slack and a witness.
pub fn find_initial_margin(prob: &BilevelProblem, x: &[f64]) -> Result<(f64, Vector)> {
    let mut d = 1.0;
    while d >= 1e-12 {
        let set = ShrunkSet::new(prob, x, d);
        if let Some(y0) = feasibility_probe(&set, 5_000)? {
            return Ok((d, y0));
        }
        d /= 2.0;
    }
    Err(Error::SlaterViolation)
}

/// Dykstra's alternating projections onto the halfspace intersection.
fn dykstra(hs: &[(Vector, f64)], y: &[f64], tol: f64, max_cycles: usize) -> Result<Vector> {
    let m = y.len();
    let mut z = y.to_vec();
    let mut corrections = vec![vec![0.0; m]; hs.len()];
    for _ in 0..max_cycles {
        let start = z.clone();
        for (idx, (a, b)) in hs.iter().enumerate() {
            let w = linalg::add(&z, &corrections[idx]);
            let viol = linalg::dot(a, &w) - b;
            let proj = if viol > 0.0 {
                let nn = linalg::dot(a, a);
                if nn > 0.0 { linalg::axpy(&w, -viol / nn, a) } else { w.clone() }
            } else {
                w.clone()
            };
            corrections[idx] = linalg::sub(&w, &proj);
            z = proj;
        }
        if linalg::dist(&start, &z) < tol / 10.0 {
            return Ok(z);
        }
    }
    Err(Error::Stalled(tol))
}

/// Euclidean projection onto the shrunk set, accurate to `tol`.
///
/// Affine constraints use Dykstra's alternating projections (exact in the
/// limit). Smooth convex constraints use a quadratic-penalty sequence solved
/// by gradient descent with backtracking, then a bisection toward the witness
/// to restore strict membership; the outer theory tolerates the resulting
/// inexactness as part of the inner accuracy budget.
pub fn project_shrunk(set: &ShrunkSet, y: &[f64], tol: f64) -> Result<Vector> {
    if set.contains(y)? {
        return Ok(y.to_vec());
    }
    let dim = set.prob.m.max(1);
    let k = set.prob.k().max(1);
    let cap = (10.0 * (k * dim) as f64 * (1.0 / tol).ln().max(1.0)).ceil() as usize;
    if set.all_affine() {
        return dykstra(&set.halfspaces(), y, tol, cap.max(100));
    }
    // Penalty scheme: min 0.5||z - y||^2 + rho * sum max(0, h_i + margin)^2.
    let mut z = y.to_vec();
    let mut rho = 10.0;
    for _ in 0..5 {
        for _ in 0..cap.max(200) {
            let h = eval_constraints(set.prob, &set.x, &z)?;
            let mut grad = linalg::sub(&z, y);
            let mut penalty = 0.0;
            for (hi, c) in h.iter().zip(&set.prob.constraints) {
                let v = hi + set.margin;
                if v > 0.0 {
                    penalty += v * v;
                    let gy = (c.grad_y)(&set.x, &z);
                    grad = linalg::axpy(&grad, 2.0 * rho * v, &gy);
                }
            }
            let gn = linalg::norm(&grad);
            if gn < tol / 10.0 {
                break;
            }
            // Backtracking line search on the penalty objective.
            let obj = |p: &[f64]| -> Result<f64> {
                let h = eval_constraints(set.prob, &set.x, p)?;
                let pen: f64 = h
                    .iter()
                    .map(|hi| {
                        let v = hi + set.margin;
                        if v > 0.0 { v * v } else { 0.0 }
                    })
                    .sum();
                Ok(0.5 * linalg::dist(p, y).powi(2) + rho * pen)
            };
            let f0 = 0.5 * linalg::dist(&z, y).powi(2) + rho * penalty;
            let mut step = 1.0 / (1.0 + 2.0 * rho);
            let mut accepted = false;
            for _ in 0..60 {
                let cand = linalg::axpy(&z, -step, &grad);
                if obj(&cand)? <= f0 - 0.25 * step * gn * gn {
                    z = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        rho *= 10.0;
    }
    if set.contains(&z)? {
        return Ok(z);
    }
    // Clip toward the strictly feasible witness until membership holds.
    let witness = set.witness.as_ref().ok_or(Error::EmptySet)?;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    // lambda = 1 is the witness itself, always a member.
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let cand: Vector =
            z.iter().zip(witness).map(|(zi, wi)| zi + mid * (wi - zi)).collect();
        if set.contains(&cand)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let out: Vector = z.iter().zip(witness).map(|(zi, wi)| zi + hi * (wi - zi)).collect();
    if set.contains(&out)? {
        Ok(out)
    } else {
        Err(Error::Stalled(tol))
    }
}
