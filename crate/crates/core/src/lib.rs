//! Fractional nabla calculus on time scales and a solver for impulsive
//! fractional dynamic equations with implicit right-hand sides and
//! non-local initial conditions.
//!
//! * [`timescale`]: time scales, jump operators and computational grids.
//! * [`nabla`] and [`frac`]: first-order and fractional nabla operators.
//! * [`solver`]: the nested fixed-point solver.
//! * [`conditions`]: uniqueness and existence checks on hypothesis constants.
//! * [`expr`] and [`config`]: the expression language and problem files.
//! * [`cli`]: the `tsfrac` command-line front end.

pub mod cli;
pub mod conditions;
pub mod config;
pub mod expr;
pub mod frac;
pub mod nabla;
pub mod output;
pub mod solver;
pub mod special;
pub mod timescale;

pub use conditions::{
    contraction_constant, estimate_constants, existence_beta_search, ContractionReport,
    ExistenceReport, HypothesisConstants, Sampling,
};
pub use expr::{Bindings, Expr, ExprError, Role};
pub use frac::{caputo_nabla, caputo_via_rl, frac_integral, rl_nabla, FracOrder, KernelTable};
pub use nabla::{nabla_derivative, nabla_integral, CalculusError, GridFunction};
pub use solver::{
    apply_impulse, solve, solve_inner_h, HistoryVariant, Impulse, ImpulsiveProblem, Solution,
    SolveError, SolverConfig,
};
pub use timescale::{Component, Grid, PointKind, TimeScale, TimeScaleError};
