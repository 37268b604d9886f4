//! Bilevel optimization with coupled lower-level inequality constraints.
//!
//! The lower-level problem `min_y g(x,y) s.t. h_i(x,y) <= 0` is replaced by a
//! log-barrier surrogate `g_t(x,y) = g(x,y) - t * sum_i log(-h_i(x,y))`, whose
//! unique interior minimizer `y_t*(x)` is smooth in `x`. The upper objective is
//! then driven by an implicit hypergradient of `f(x, y_t*(x))`, with every
//! smoothness and strong-convexity constant certified from a user-supplied
//! constant registry rather than estimated on the fly. A path-following driver
//! shrinks `t` geometrically to approach the original problem.
//!
//! Entry points:
//! - [`testbed`] builds ready-made problem instances and brute-force oracles.
//! - [`lower`] solves the barrier lower level on a margin-shrunk feasible set.
//! - [`hypergrad`] computes the implicit hypergradient and its error bound.
//! - [`outer`] runs the projected hypergradient loop at fixed `t`.
//! - [`path`] halves `t` and the target accuracy across rounds.
//!
//! The `examples/` directory contains one runnable program per capability; a
//! thin CLI binary exposes the same flows as `solve`, `pathfollow`, `verify`
//! and `sweep-t` subcommands.

pub mod barrier;
pub mod cli;
pub mod config;
pub mod error;
pub mod hypergrad;
pub mod linalg;
pub mod lower;
pub mod outer;
pub mod path;
pub mod problem;
pub mod projection;
pub mod testbed;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
