//! EFX and Pareto-optimal allocations of two types of identical goods.
//!
//! Entry point is [`solver::solve`]. The brute-force [`oracle`] module checks
//! small instances independently of the solver.

pub mod allocation;
pub mod arith;
pub mod error;
pub mod gen;
pub mod instance;
pub mod io;
pub mod oracle;
pub mod realloc;
pub mod solver;
pub mod split;

pub use allocation::{Allocation, Bundle, EnvyVerdict, Segment, SegmentedAllocation};
pub use arith::Rational;
pub use error::{Error, Result, ValidationError};
pub use instance::{AgentValuation, NormalizedInstance, PreparedInstance, RawInstance};
pub use split::SplitIndex;
pub use solver::{solve, solve_with, Certificate, CheckLevel, SolveOptions, SolveResult};
