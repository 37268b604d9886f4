//! Path following on the toy QP: halve the barrier parameter and the target
//! stationarity each round, warm-starting the next round from the last
//! iterate. The barrier solutions trace out the central path toward the
//! original bilevel problem.

use bilevel_barrier::outer::OuterOptions;
use bilevel_barrier::path::run_pathfollow;
use bilevel_barrier::testbed::toy_qp_problem;

fn main() {
    let prob = toy_qp_problem();
    let trace = run_pathfollow(&prob, &[1.2], 0.1, 1e-2, 4, 100, 0, OuterOptions::default())
        .expect("schedule runs");

    println!("{:>2} {:>9} {:>9} {:>14} {}", "i", "t_i", "eps_i", "best_stat", "status");
    for round in &trace.rounds {
        println!(
            "{:>2} {:>9} {:>9} {:>14.3e} {:?}",
            round.i, round.t_i, round.eps_i, round.result.best_stationarity, round.result.status
        );
    }
    if let Some(x) = trace.final_x() {
        println!("final upper iterate: {x:?}");
    }
}
