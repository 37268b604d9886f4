//! Path following: repeated outer runs with geometrically shrinking barrier
//! parameter and target accuracy, warm-starting the upper iterate (and, via
//! the outer loop, the lower solver) across rounds.

use crate::barrier::BarrierContext;
use crate::linalg::Vector;
use crate::outer::{run_bfbm_with, OuterOptions, RunResult, RunStatus};
use crate::problem::BilevelProblem;
use crate::{Error, Result};

/// One round of the halving schedule.
#[derive(Clone, Debug)]
pub struct PathRound {
    pub i: usize,
    pub t_i: f64,
    pub eps_i: f64,
    pub result: RunResult,
}

/// Full path-following record. `t_i` and `eps_i` follow exact halving:
/// `t_i = t0 / 2^i`, `eps_i = eps0 / 2^i`.
#[derive(Clone, Debug, Default)]
pub struct PathTrace {
    pub rounds: Vec<PathRound>,
}

impl PathTrace {
    pub fn final_x(&self) -> Option<&Vector> {
        self.rounds.last().map(|r| &r.result.x_out)
    }
}

/// Runs `rounds` outer loops, halving `t` and `eps` each round and starting
/// each round from the previous round's output iterate. Stops after a failed
/// round, preserving the partial trace.
pub fn run_pathfollow(
    prob: &BilevelProblem,
    x0: &[f64],
    t0: f64,
    eps0: f64,
    rounds: usize,
    max_outer_per_round: usize,
    seed: u64,
    opts: OuterOptions,
) -> Result<PathTrace> {
    if rounds == 0 {
        return Err(Error::Config("rounds must be >= 1".into()));
    }
    if eps0 <= 0.0 {
        return Err(Error::Config(format!("eps0 = {eps0} must be positive")));
    }
    let mut trace = PathTrace::default();
    let mut x = x0.to_vec();
    let mut t_i = t0;
    let mut eps_i = eps0;
    for i in 0..rounds {
        let ctx = BarrierContext::new(prob, t_i)?;
        let result = run_bfbm_with(&ctx, &x, eps_i, max_outer_per_round, seed, opts);
        let failed = matches!(result.status, RunStatus::Failed(_));
        x = result.x_out.clone();
        trace.rounds.push(PathRound { i, t_i, eps_i, result });
        if failed {
            break;
        }
        t_i /= 2.0;
        eps_i /= 2.0;
    }
    Ok(trace)
}
