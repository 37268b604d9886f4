//! Solves the barrier lower level on the built-in bilinear example and
//! compares against its closed form: y1 = (t - sqrt(t^2 + x^2)) / x (zero at
//! x = 0) and y2 = t.

use bilevel_barrier::barrier::BarrierContext;
use bilevel_barrier::lower::solve_lower;
use bilevel_barrier::testbed::{example1_closed_form, example1_problem};

fn main() {
    let prob = example1_problem();
    println!("{:>6} {:>6} {:>12} {:>12} {:>10}", "x", "t", "y1", "y1 exact", "|err|");
    for (x, t) in [(1.0, 0.1), (-1.0, 0.1), (0.5, 0.05), (-0.5, 0.05), (0.0, 0.3)] {
        let ctx = BarrierContext::new(&prob, t).expect("t within range");
        let sol = solve_lower(&ctx, &[x], 1e-8, None).expect("lower solve");
        let (y1, y2, _) = example1_closed_form(t, x);
        let err = (sol.y_tilde[0] - y1).abs().max((sol.y_tilde[1] - y2).abs());
        println!(
            "{:>6} {:>6} {:>12.8} {:>12.8} {:>10.2e}",
            x, t, sol.y_tilde[0], y1, err
        );
        assert!(err < 1e-6, "closed form mismatch at x={x}, t={t}");
    }
    println!("all points within 1e-6 of the closed form");
}
