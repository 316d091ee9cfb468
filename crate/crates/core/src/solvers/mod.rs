//! Embedded dense solvers sized for the local problems agents solve
//! (tens of variables, up to a few hundred constraints).
//!
//! - [`simplex`]: two-phase tableau simplex with Bland's rule, plus
//!   [`lexicographic_solve`] which returns the lexicographically smallest
//!   optimal vertex.
//! - [`active_set_qp`]: primal active-set method for convex QPs; when `P` is
//!   singular the returned optimum is the minimum-norm point of the optimal set.
//! - [`projected_gradient`]: Armijo backtracking projected gradient for smooth
//!   convex objectives.

mod lp;
mod pg;
mod qp;

pub use lp::{lexicographic_solve, simplex, RowSense, StandardFormLP};
pub use pg::{project, projected_gradient};
pub use qp::active_set_qp;

pub use pg::projected_gradient_traced;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite problem data")]
    NonFinite,
    #[error("matrix is not symmetric positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("invalid option: {0}")]
    BadOptions(&'static str),
    #[error("feasible set is empty")]
    Infeasible,
    #[error("unsupported problem: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Function(#[from] crate::functions::FunctionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    None,
    /// Among optimal solutions return the lexicographically smallest
    /// (LP), or the minimum-norm one (QP).
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub initial_point: Option<Vec<f64>>,
    pub tie_break: TieBreak,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-8,
            initial_point: None,
            tie_break: TieBreak::None,
        }
    }
}

impl SolverOptions {
    pub fn lexicographic() -> Self {
        Self { tie_break: TieBreak::Lexicographic, ..Self::default() }
    }

    pub(crate) fn validate(&self) -> Result<(), SolverError> {
        if !(self.feasibility_tol > 0.0 && self.optimality_tol > 0.0) {
            return Err(SolverError::BadOptions("tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Lagrange multipliers, one per constraint row; nonnegative for
    /// inequalities. `None` when the solver does not produce them.
    pub dual_values: Option<Vec<f64>>,
    pub status: Status,
    pub iterations: usize,
}

impl Solution {
    pub(crate) fn failed(status: Status, n: usize, iterations: usize) -> Self {
        Self { x: vec![f64::NAN; n], objective_value: f64::NAN, dual_values: None, status, iterations }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
