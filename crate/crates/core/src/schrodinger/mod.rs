//! Direct problem: Crank–Nicolson in time for the homogenized equation,
//! `u'` from the equation itself, and Neumann traces on the observed part of
//! the boundary.

mod crank_nicolson;
mod direct;
mod source;
mod trace;

pub use crank_nicolson::{CrankNicolson, StepStats, MAX_CONTRACTION};
pub use direct::{
    manufactured_convergence, solve_direct, DirectDiagnostics, DirectSolution, Snapshot, SolveOptions, MIN_TIME_STEPS,
};
pub use source::{build_source, BoundaryData, TimeAffine};
pub use trace::{neumann_trace, sigma_norm};
