//! Thin command-line front end; all behavior lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bilevel_barrier::cli;
use bilevel_barrier::config::{self, RunConfig};

#[derive(Parser)]
#[command(name = "bilevel-barrier", version, about = "Barrier-smoothed bilevel solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the outer loop at a fixed barrier parameter
    Solve(CommonArgs),
    /// Run the halving schedule over barrier parameter and accuracy
    Pathfollow(CommonArgs),
    /// Run verification suites and emit a JSON report
    Verify(CommonArgs),
    /// Sweep the barrier parameter geometrically at a probe point
    #[command(name = "sweep-t")]
    SweepT(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Built-in problem name (example1, example1_ball, toy_qp, price_setting, svm)
    #[arg(long)]
    problem: Option<String>,
    /// Key-value config file; flags override file entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Barrier parameter (solve, sweep-t)
    #[arg(long)]
    t: Option<f64>,
    /// Initial barrier parameter (pathfollow, sweep-t)
    #[arg(long)]
    t0: Option<f64>,
    /// Target stationarity (solve)
    #[arg(long)]
    eps: Option<f64>,
    /// Initial target stationarity (pathfollow)
    #[arg(long)]
    eps0: Option<f64>,
    /// Number of halving rounds (pathfollow, sweep-t)
    #[arg(long)]
    rounds: Option<usize>,
    /// Outer iteration budget (per round for pathfollow)
    #[arg(long = "max-outer")]
    max_outer: Option<usize>,
    /// Starting upper iterate, comma-separated reals
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<String>,
    /// Verification suite name
    #[arg(long)]
    suite: Option<String>,
    /// Inner accelerated update: verbatim | standard
    #[arg(long = "inner-variant")]
    inner_variant: Option<String>,
    /// Append the norm-ball constraint to the lower level
    #[arg(long = "augment-ball")]
    augment_ball: bool,
}

fn build_config(args: &CommonArgs) -> Result<RunConfig, bilevel_barrier::Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let map = config::parse_file(path)?;
        cfg.apply_map(&map)?;
    }
    if let Some(p) = &args.problem {
        cfg.problem = Some(p.clone());
    }
    cfg.t = args.t.or(cfg.t);
    cfg.t0 = args.t0.or(cfg.t0);
    cfg.eps = args.eps.or(cfg.eps);
    cfg.eps0 = args.eps0.or(cfg.eps0);
    cfg.rounds = args.rounds.or(cfg.rounds);
    cfg.max_outer = args.max_outer.or(cfg.max_outer);
    if let Some(x0) = &args.x0 {
        cfg.x0 = Some(config::parse_vector("x0", x0)?);
    }
    cfg.seed = args.seed.or(cfg.seed);
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(suite) = &args.suite {
        cfg.suite = Some(suite.clone());
    }
    if let Some(v) = &args.inner_variant {
        cfg.inner_variant = Some(v.parse()?);
    }
    if args.augment_ball {
        cfg.augment_ball = true;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, fn(&RunConfig) -> i32) = match &cli.command {
        Command::Solve(a) => (a, cli::cmd_solve),
        Command::Pathfollow(a) => (a, cli::cmd_pathfollow),
        Command::Verify(a) => (a, cli::cmd_verify),
        Command::SweepT(a) => (a, cli::cmd_sweep_t),
    };
    let code = match build_config(args) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    ExitCode::from(code as u8)
}
