//! CDCL SAT solving with level-annotated trails, KeyTrace extraction, and
//! budgeted imitation of expert branching decisions.
//!
//! The pipeline: [`cdcl::solve`] records a [`Trail`]; [`extract_keytrace`]
//! collapses it into the surviving decision path; [`harvest_probes`] turns
//! that path into supervision; a [`policy::BranchingPolicy`] (an expert
//! oracle, a count-based cloned model, or an external process) is consulted
//! for a bounded number of decisions; [`eval`] compares propagation counts
//! against the VSIDS baseline.

pub mod cdcl;
pub mod cnf;
mod error;
pub mod eval;
pub mod gen;
pub mod keytrace;
pub mod policy;
pub mod scalar;

pub use cdcl::{solve, solve_with, Outcome, RunStats, SolveResult, SolverConfig, Trail, TrailEvent};
pub use cnf::{parse_dimacs, write_dimacs, Assignment, Clause, Formula, Lit};
pub use error::{Error, Result};
pub use keytrace::{extract_keytrace, harvest_probes, KeyTrace, ProbeSample};

/// Solver with double precision activities.
pub type Solver = cdcl::Solver<f64>;
/// Solver with single precision activities.
pub type Solver32 = cdcl::Solver<f32>;
/// Exact rational used for metrics.
pub type Rational = num_rational::Ratio<u128>;
