use nalgebra::DMatrix;

use super::qp::active_set_qp;
use super::{Solution, SolverError, SolverOptions, Status};
use crate::functions::{Bound, Constraint, Expression};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Relative size below which two objective values are indistinguishable.
const FLAT_REL: f64 = 1e-13;

/// Euclidean projection onto the polyhedron described by `constraints`.
///
/// Boxes (every row bounds a single coordinate) are clipped in closed form;
/// anything else solves `min ½‖y − x‖²` with the active-set QP.
pub fn project(x: &[f64], constraints: &[Constraint]) -> Result<Vec<f64>, SolverError> {
    let n = x.len();
    if let Some(c) = constraints.iter().find(|c| c.dim() != n) {
        return Err(SolverError::Dimension(format!("constraint has dimension {}, expected {n}", c.dim())));
    }
    let bounds: Option<Vec<Bound>> = constraints.iter().map(|c| c.canonical().as_bound()).collect();
    if let Some(bounds) = bounds {
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for b in bounds {
            match b {
                Bound::Lower(k, v) => lo[k] = lo[k].max(v),
                Bound::Upper(k, v) => hi[k] = hi[k].min(v),
            }
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(SolverError::Infeasible);
        }
        return Ok(x.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect());
    }
    let q: Vec<f64> = x.iter().map(|v| -v).collect();
    let s = active_set_qp(&DMatrix::identity(n, n), &q, constraints, &SolverOptions::default())?;
    match s.status {
        Status::Optimal => Ok(s.x),
        Status::Infeasible => Err(SolverError::Infeasible),
        _ => Err(SolverError::Unsupported("projection did not converge")),
    }
}

/// Projected gradient with Armijo backtracking for a smooth convex `f` over a
/// polyhedron. Stops once `‖x − P(x − ∇f(x))‖ ≤ optimality_tol`.
pub fn projected_gradient(f: &Expression, constraints: &[Constraint], opts: &SolverOptions) -> Result<Solution, SolverError> {
    projected_gradient_traced(f, constraints, opts).map(|(s, _)| s)
}

/// As [`projected_gradient`], also returning `f` at every iterate.
pub fn projected_gradient_traced(
    f: &Expression,
    constraints: &[Constraint],
    opts: &SolverOptions,
) -> Result<(Solution, Vec<f64>), SolverError> {
    opts.validate()?;
    if !f.is_scalar() {
        return Err(SolverError::Function(crate::functions::FunctionError::NotScalar(f.out_dim())));
    }
    let n = f.in_dim();
    let x0 = opts.initial_point.clone().unwrap_or_else(|| vec![0.0; n]);
    if x0.len() != n {
        return Err(SolverError::Dimension(format!("initial point has length {}, expected {n}", x0.len())));
    }
    let mut x = project(&x0, constraints)?;
    let mut fx = f.value(&x)?;
    let mut g = f.subgradient(&x)?;
    let mut trace = vec![fx];
    let mut alpha = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;

    let residual = |x: &[f64], g: &[f64]| -> Result<f64, SolverError> {
        let y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        let p = project(&y, constraints)?;
        Ok(x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    };

    let status = loop {
        let r = residual(&x, &g)?;
        if !fx.is_finite() {
            return Err(SolverError::NonFinite);
        }
        if r <= opts.optimality_tol {
            break Status::Optimal;
        }
        if iterations >= opts.max_iterations {
            break Status::IterationLimit;
        }
        iterations += 1;

        // Barzilai–Borwein guess for the first trial step
        if let Some((xp, gp)) = &prev {
            let (mut ss, mut sy) = (0.0, 0.0);
            for k in 0..n {
                let s = x[k] - xp[k];
                ss += s * s;
                sy += s * (g[k] - gp[k]);
            }
            alpha = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (alpha * 2.0).min(1e12) };
        }

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
            let y = project(&trial, constraints)?;
            let fy = f.value(&y)?;
            let decrease: f64 = g.iter().zip(y.iter().zip(&x)).map(|(gk, (yk, xk))| gk * (yk - xk)).sum();
            if decrease < 0.0 && fy <= fx + ARMIJO * decrease {
                accepted = Some((y, fy, None));
                break;
            }
            // Near the optimum f can stop resolving the decrease. For convex
            // f, ∇f(y)ᵀ(y − x) ≤ 0 still certifies f(y) ≤ f(x).
            if decrease < 0.0 && (fy - fx).abs() <= FLAT_REL * (1.0 + fx.abs()) {
                let gy = f.subgradient(&y)?;
                let slope: f64 = gy.iter().zip(y.iter().zip(&x)).map(|(gk, (yk, xk))| gk * (yk - xk)).sum();
                if slope <= 0.0 {
                    accepted = Some((y, fy.min(fx), Some(gy)));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((y, fy, gy)) = accepted else {
            // no representable decrease left
            let loose = opts.optimality_tol.sqrt() * (1.0 + g.iter().map(|v| v.abs()).fold(0.0, f64::max));
            break if r <= loose { Status::Optimal } else { Status::IterationLimit };
        };
        let gy = match gy {
            Some(g) => g,
            None => f.subgradient(&y)?,
        };
        prev = Some((std::mem::replace(&mut x, y), std::mem::replace(&mut g, gy)));
        fx = fy;
        trace.push(fx);
    };
    Ok((Solution { objective_value: fx, x, dual_values: None, status, iterations }, trace))
}
