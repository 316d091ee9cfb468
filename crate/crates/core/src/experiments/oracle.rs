//! Centralized reference solutions used by the error metrics.

use super::data::{local_logistic_objective, local_microgrid_problem, svm_constraints, svm_objective, ClassificationData, MicrogridData};
use super::{ExperimentError, Instance};
use crate::functions::{Constraint, Expression};
use crate::problem::{solve, Problem};
use crate::solvers::SolverOptions;

/// Optimum of the pooled problem. For the microgrid `x` stacks every unit's
/// decision vector and `coupling_duals` holds the budget multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub x: Vec<f64>,
    pub f: f64,
    pub coupling_duals: Option<Vec<f64>>,
}

fn checked(p: &Problem, opts: &SolverOptions) -> Result<crate::solvers::Solution, ExperimentError> {
    let s = solve(p, opts)?;
    if !s.is_optimal() {
        return Err(ExperimentError::Oracle(s.status));
    }
    Ok(s)
}

/// `min Σ_i f_i(w, b)` with the split regularizer, by projected gradient run
/// to a tight stationarity tolerance.
pub fn logistic_oracle(data: &[ClassificationData], c: f64) -> Result<Oracle, ExperimentError> {
    let n = data.len();
    let terms = data.iter().map(|d| local_logistic_objective(d, n, c)).collect::<Result<Vec<_>, _>>()?;
    let opts = SolverOptions { optimality_tol: 1e-11, max_iterations: 200_000, ..SolverOptions::default() };
    let s = checked(&Problem::unconstrained(Expression::sum(terms)?)?, &opts)?;
    Ok(Oracle { f: s.objective_value, x: s.x, coupling_duals: None })
}

/// Hard-margin SVM over all points, `b` tie-broken to minimum norm.
pub fn svm_oracle(data: &[ClassificationData]) -> Result<Oracle, ExperimentError> {
    let cons = data.iter().map(svm_constraints).collect::<Result<Vec<_>, _>>()?.concat();
    let s = checked(&Problem::new(svm_objective(), cons)?, &SolverOptions::lexicographic())?;
    Ok(Oracle { f: s.objective_value, x: s.x, coupling_duals: None })
}

/// The pooled microgrid LP: every unit's constraints plus the shared budget.
pub fn microgrid_oracle(data: &[MicrogridData]) -> Result<Oracle, ExperimentError> {
    let locals = data.iter().map(local_microgrid_problem).collect::<Result<Vec<_>, _>>()?;
    let dims: Vec<usize> = locals.iter().map(|l| l.dim()).collect();
    let total: usize = dims.iter().sum();
    let s = locals.first().map(|l| l.coupling_dim()).unwrap_or(0);
    let mut cost = vec![0.0; total];
    let mut cons = Vec::new();
    let mut coupling = vec![vec![0.0; total]; s];
    let mut rhs = vec![0.0; s];
    let mut off = 0;
    for (l, &d) in locals.iter().zip(&dims) {
        let (c, _) = l.f.as_affine().expect("linear cost");
        for k in 0..d {
            cost[off + k] = c[(0, k)];
        }
        for con in &l.x_i {
            let (a, b) = con.affine_row().expect("affine");
            let mut row = vec![0.0; total];
            row[off..off + d].copy_from_slice(a);
            cons.push(if con.is_equality() { Constraint::eq(row, b) } else { Constraint::le(row, b) });
        }
        let (g, g0) = l.g.as_affine().expect("affine coupling");
        for k in 0..s {
            for j in 0..d {
                coupling[k][off + j] = g[(k, j)];
            }
            rhs[k] -= g0[k];
        }
        off += d;
    }
    let first = cons.len();
    cons.extend(coupling.into_iter().zip(&rhs).map(|(a, &b)| Constraint::le(a, b)));
    let sol = checked(&Problem::new(Expression::linear(&cost, 0.0), cons)?, &SolverOptions::default())?;
    let duals = sol.dual_values.as_ref().map(|d| d[first..first + s].to_vec());
    Ok(Oracle { f: sol.objective_value, x: sol.x, coupling_duals: duals })
}

pub fn centralized_oracle(instance: &Instance) -> Result<Oracle, ExperimentError> {
    match instance {
        Instance::Logistic { data, c } => logistic_oracle(data, *c),
        Instance::Svm { data } => svm_oracle(data),
        Instance::Microgrid { data } => microgrid_oracle(data),
    }
}
