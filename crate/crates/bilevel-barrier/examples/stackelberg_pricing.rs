//! Stackelberg pricing demo: a leader sets taxes on two activities, the
//! follower re-optimizes its activity levels (a linear program smoothed by
//! the barrier), and the leader reads off revenue and its hypergradient.

use bilevel_barrier::barrier::BarrierContext;
use bilevel_barrier::hypergrad::approx_hypergradient;
use bilevel_barrier::lower::solve_lower;
use bilevel_barrier::testbed::price_setting_problem;

fn main() {
    let prob = price_setting_problem(2, 1, 7);
    let ctx = BarrierContext::new(&prob, 0.06).unwrap();

    let mut warm = None;
    for taxes in [[0.0, 0.0], [0.2, 0.2], [0.4, 0.1], [0.5, 0.5]] {
        let sol = solve_lower(&ctx, &taxes, 1e-6, warm.take().as_deref()).unwrap();
        let revenue = -(prob.f)(&taxes, &sol.y_tilde);
        let hg = approx_hypergradient(&ctx, &taxes, &sol).unwrap();
        println!(
            "taxes {:?} -> activity {:?}",
            taxes,
            sol.y_tilde.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        );
        println!(
            "  revenue {:.4}, revenue gradient [{:.4}, {:.4}] (ascent direction)",
            revenue, -hg.grad[0], -hg.grad[1]
        );
        warm = Some(sol.y_tilde);
    }
    println!("a positive gradient entry means raising that tax gains revenue");
}
