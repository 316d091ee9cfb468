//! Local problem data for the three set-ups and the dispatching local solver.
//!
//! ```
//! use dopt::functions::{Constraint, Expression};
//! use dopt::problem::{solve, Problem};
//! use dopt::solvers::SolverOptions;
//!
//! let f = Expression::squared_norm(Expression::variable(2)).unwrap();
//! let p = Problem::new(f, Constraint::box_bounds(&[-1.0, -1.0], &[1.0, 1.0])).unwrap();
//! let s = solve(&p, &SolverOptions::default()).unwrap();
//! assert_eq!(s.x, vec![0.0, 0.0]);
//! ```

use thiserror::Error;

use crate::functions::{Bound, Constraint, Expression, FunctionError};
use crate::solvers::{
    self, active_set_qp, lexicographic_solve, projected_gradient, simplex, RowSense, Solution, SolverError,
    SolverOptions, StandardFormLP, Status, TieBreak,
};
use nalgebra::DMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("objective must be scalar, has {0} outputs")]
    NotScalar(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("coupling function must be affine")]
    NonAffineCoupling,
    #[error("nonlinear convex constraints are not supported by the local solver")]
    NonlinearConstraint,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Function(#[from] FunctionError),
}

/// `min f(x)` subject to canonical constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    objective: Expression,
    constraints: Vec<Constraint>,
}

impl Problem {
    pub fn new(objective: Expression, constraints: Vec<Constraint>) -> Result<Self, ProblemError> {
        if !objective.is_scalar() {
            return Err(ProblemError::NotScalar(objective.out_dim()));
        }
        let d = objective.in_dim();
        check_dims(&constraints, d)?;
        Ok(Self { objective, constraints: constraints.iter().map(Constraint::canonical).collect() })
    }

    pub fn unconstrained(objective: Expression) -> Result<Self, ProblemError> {
        Self::new(objective, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.objective.in_dim()
    }

    pub fn objective(&self) -> &Expression {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> Result<f64, ProblemError> {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            worst = worst.max(c.violation(x)?);
        }
        Ok(worst)
    }
}

fn check_dims(constraints: &[Constraint], d: usize) -> Result<(), ProblemError> {
    match constraints.iter().find(|c| c.dim() != d) {
        Some(c) => Err(ProblemError::Dimension { expected: d, got: c.dim() }),
        None => Ok(()),
    }
}

/// Cost-coupled set-up: private `f_i`, common set `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostCoupledLocal {
    pub f: Expression,
    pub x_set: Vec<Constraint>,
}

impl CostCoupledLocal {
    pub fn new(f: Expression, x_set: Vec<Constraint>) -> Result<Self, ProblemError> {
        let p = Problem::new(f, x_set)?;
        Ok(Self { f: p.objective, x_set: p.constraints })
    }

    pub fn dim(&self) -> usize {
        self.f.in_dim()
    }
}

/// Common-cost set-up: `f` known to every agent, private constraints `X_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonCostLocal {
    pub f: Expression,
    pub x_i: Vec<Constraint>,
}

impl CommonCostLocal {
    pub fn new(f: Expression, x_i: Vec<Constraint>) -> Result<Self, ProblemError> {
        let p = Problem::new(f, x_i)?;
        Ok(Self { f: p.objective, x_i: p.constraints })
    }

    pub fn dim(&self) -> usize {
        self.f.in_dim()
    }

    /// True when every local holds a structurally identical cost.
    pub fn same_cost(locals: &[CommonCostLocal]) -> bool {
        locals.windows(2).all(|w| w[0].f.fingerprint() == w[1].f.fingerprint())
    }
}

/// Constraint-coupled set-up: private `f_i`, `X_i` and coupling contribution
/// `g_i : R^{d_i} → R^S`, with `Σ_i g_i(x_i) ≤ 0` shared.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCoupledLocal {
    pub f: Expression,
    pub x_i: Vec<Constraint>,
    pub g: Expression,
}

impl ConstraintCoupledLocal {
    pub fn new(f: Expression, x_i: Vec<Constraint>, g: Expression) -> Result<Self, ProblemError> {
        let p = Problem::new(f, x_i)?;
        if g.in_dim() != p.dim() {
            return Err(ProblemError::Dimension { expected: p.dim(), got: g.in_dim() });
        }
        if !g.is_affine() {
            return Err(ProblemError::NonAffineCoupling);
        }
        Ok(Self { f: p.objective, x_i: p.constraints, g })
    }

    pub fn dim(&self) -> usize {
        self.f.in_dim()
    }

    pub fn coupling_dim(&self) -> usize {
        self.g.out_dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalData {
    CostCoupled(CostCoupledLocal),
    CommonCost(CommonCostLocal),
    ConstraintCoupled(ConstraintCoupledLocal),
}

impl LocalData {
    pub fn dim(&self) -> usize {
        match self {
            LocalData::CostCoupled(l) => l.dim(),
            LocalData::CommonCost(l) => l.dim(),
            LocalData::ConstraintCoupled(l) => l.dim(),
        }
    }

    /// `S` for constraint-coupled data, `None` otherwise.
    pub fn coupling_dim(&self) -> Option<usize> {
        match self {
            LocalData::ConstraintCoupled(l) => Some(l.coupling_dim()),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LocalData::CostCoupled(_) => "cost-coupled",
            LocalData::CommonCost(_) => "common-cost",
            LocalData::ConstraintCoupled(_) => "constraint-coupled",
        }
    }
}

/// Euclidean projection of `x` onto the set described by `constraints`.
pub fn project(constraints: &[Constraint], x: &[f64]) -> Result<Vec<f64>, ProblemError> {
    Ok(solvers::project(x, constraints)?)
}

/// Solves a local problem: linear objectives go to the simplex method,
/// quadratic ones to the active-set QP, anything else to projected gradient.
///
/// Duals follow `∇f(x) + Σ λ_k ∇c_k(x) = 0` with `λ_k ≥ 0` on inequalities.
pub fn solve(p: &Problem, opts: &SolverOptions) -> Result<Solution, ProblemError> {
    if p.constraints.iter().any(|c| !c.is_affine()) {
        return Err(ProblemError::NonlinearConstraint);
    }
    let mut sol = if let Some((m, _)) = p.objective.as_affine() {
        solve_lp(p, m.row(0).iter().copied().collect(), opts)?
    } else if let Some((pm, q, _)) = p.objective.as_quadratic() {
        active_set_qp(&pm, &q, &p.constraints, opts)?
    } else {
        let mut s = projected_gradient(&p.objective, &p.constraints, opts)?;
        if s.is_optimal() {
            s.dual_values = Some(recover_duals(p, &s.x, opts)?);
        }
        s
    };
    if sol.is_optimal() {
        sol.objective_value = p.objective.value(&sol.x)?;
    }
    Ok(sol)
}

fn solve_lp(p: &Problem, c: Vec<f64>, opts: &SolverOptions) -> Result<Solution, ProblemError> {
    let n = c.len();
    let mut lp = StandardFormLP::new(c.clone());
    // single-coordinate rows become variable bounds; remember which row sets
    // the effective bound so its multiplier can be reported
    let mut lo_src: Vec<Option<usize>> = vec![None; n];
    let mut hi_src: Vec<Option<usize>> = vec![None; n];
    let mut row_src = Vec::new();
    for (k, con) in p.constraints.iter().enumerate() {
        match con.as_bound() {
            Some(Bound::Lower(j, v)) => {
                if lo_src[j].is_none() || v > lp.lower[j] {
                    lp.lower[j] = v;
                    lo_src[j] = Some(k);
                }
            }
            Some(Bound::Upper(j, v)) => {
                if hi_src[j].is_none() || v < lp.upper[j] {
                    lp.upper[j] = v;
                    hi_src[j] = Some(k);
                }
            }
            None => {
                let (a, b) = con.affine_row().expect("affine");
                lp.add_row(a.to_vec(), if con.is_equality() { RowSense::Eq } else { RowSense::Le }, b);
                row_src.push(k);
            }
        }
    }
    if (0..n).any(|j| lp.lower[j] > lp.upper[j]) {
        return Ok(Solution::failed(Status::Infeasible, n, 0));
    }
    let mut s = match opts.tie_break {
        TieBreak::Lexicographic => lexicographic_solve(&lp, opts)?,
        TieBreak::None => simplex(&lp, opts)?,
    };
    if let (true, Some(y)) = (s.is_optimal(), s.dual_values.take()) {
        let mut duals = vec![0.0; p.constraints.len()];
        let mut reduced = c;
        for (r, &k) in row_src.iter().enumerate() {
            duals[k] = if p.constraints[k].is_equality() { -y[r] } else { (-y[r]).max(0.0) };
            for (j, a) in lp.a[r].iter().enumerate() {
                reduced[j] -= a * y[r];
            }
        }
        for j in 0..n {
            let rj = reduced[j];
            if rj > 0.0 {
                if let Some(k) = lo_src[j] {
                    duals[k] = rj;
                }
            } else if rj < 0.0 {
                if let Some(k) = hi_src[j] {
                    duals[k] = -rj;
                }
            }
        }
        s.dual_values = Some(duals);
    }
    Ok(s)
}

/// Multipliers for a smooth objective at a computed optimum: the nonnegative
/// least-squares fit of `−∇f(x)` by the gradients of the tight constraints.
fn recover_duals(p: &Problem, x: &[f64], opts: &SolverOptions) -> Result<Vec<f64>, ProblemError> {
    let g = p.objective.subgradient(x)?;
    let tight: Vec<usize> = (0..p.constraints.len())
        .filter(|&k| {
            let c = &p.constraints[k];
            c.is_equality() || c.violation(x).map(|v| v.abs() <= 1e-6).unwrap_or(false)
        })
        .collect();
    let mut duals = vec![0.0; p.constraints.len()];
    if tight.is_empty() {
        return Ok(duals);
    }
    let rows: Vec<&[f64]> = tight.iter().map(|&k| p.constraints[k].affine_row().expect("affine").0).collect();
    let m = tight.len();
    let gram = DMatrix::from_fn(m, m, |r, c| dot(rows[r], rows[c]));
    let lin: Vec<f64> = rows.iter().map(|a| dot(a, &g)).collect();
    let signs: Vec<Constraint> = (0..m)
        .filter(|&r| !p.constraints[tight[r]].is_equality())
        .map(|r| {
            let mut e = vec![0.0; m];
            e[r] = 1.0;
            Constraint::ge(e, 0.0)
        })
        .collect();
    let s = active_set_qp(&gram, &lin, &signs, &SolverOptions { initial_point: None, ..opts.clone() })?;
    if s.is_optimal() {
        for (r, &k) in tight.iter().enumerate() {
            duals[k] = s.x[r];
        }
    }
    Ok(duals)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
