use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::lp::{simplex, RowSense, StandardFormLP};
use super::{Solution, SolverError, SolverOptions, Status};
use crate::functions::Constraint;

#[derive(Debug, Clone)]
struct Row {
    a: DVector<f64>,
    b: f64,
    eq: bool,
}

struct Core {
    x: DVector<f64>,
    duals: Vec<f64>,
    status: Status,
    iterations: usize,
}

fn rows_of(constraints: &[Constraint], n: usize) -> Result<Vec<Row>, SolverError> {
    constraints
        .iter()
        .map(|c| {
            let c = c.canonical();
            let (a, b) = c.affine_row().ok_or(SolverError::Unsupported("nonlinear constraint in a QP"))?;
            if a.len() != n {
                return Err(SolverError::Dimension(format!("constraint has dimension {}, expected {n}", a.len())));
            }
            if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFinite);
            }
            Ok(Row { a: DVector::from_column_slice(a), b, eq: c.is_equality() })
        })
        .collect()
}

fn feasible(rows: &[Row], x: &DVector<f64>, tol: f64) -> bool {
    rows.iter().all(|r| {
        let v = r.a.dot(x) - r.b;
        if r.eq {
            v.abs() <= tol
        } else {
            v <= tol
        }
    })
}

fn feasible_point(rows: &[Row], n: usize, opts: &SolverOptions) -> Result<Option<DVector<f64>>, SolverError> {
    let mut lp = StandardFormLP::new(vec![0.0; n]);
    for r in rows {
        lp.add_row(r.a.iter().copied().collect(), if r.eq { RowSense::Eq } else { RowSense::Le }, r.b);
    }
    let s = simplex(&lp, &SolverOptions { initial_point: None, ..opts.clone() })?;
    Ok(s.is_optimal().then(|| DVector::from_vec(s.x)))
}

/// Orthonormal basis of `{d : a_i·d = 0, i ∈ W}` for independent rows.
fn null_space(rows: &[Row], work: &[usize], n: usize) -> DMatrix<f64> {
    if work.is_empty() {
        return DMatrix::identity(n, n);
    }
    let mut m = DMatrix::zeros(n, n);
    for &i in work {
        m += &rows[i].a * rows[i].a.transpose();
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let k = n - work.len();
    DMatrix::from_fn(n, k, |r, c| eig.eigenvectors[(r, order[c])])
}

fn independent(z: &DMatrix<f64>, a: &DVector<f64>) -> bool {
    z.ncols() > 0 && (z.transpose() * a).norm() > 1e-8 * a.norm().max(1e-300)
}

/// Least-squares multipliers with `g + A_Wᵀλ = 0`.
fn multipliers(rows: &[Row], work: &[usize], g: &DVector<f64>) -> DVector<f64> {
    let k = work.len();
    if k == 0 {
        return DVector::zeros(0);
    }
    let gram = DMatrix::from_fn(k, k, |r, c| rows[work[r]].a.dot(&rows[work[c]].a));
    let rhs = DVector::from_fn(k, |r, _| -rows[work[r]].a.dot(g));
    gram.clone().cholesky().map(|ch| ch.solve(&rhs)).or_else(|| gram.lu().solve(&rhs)).unwrap_or_else(|| DVector::zeros(k))
}

fn solve_core(p: &DMatrix<f64>, q: &DVector<f64>, rows: &[Row], opts: &SolverOptions) -> Result<Core, SolverError> {
    let n = q.len();
    let start = opts
        .initial_point
        .as_ref()
        .filter(|x0| x0.len() == n)
        .map(|x0| DVector::from_column_slice(x0))
        .filter(|x0| feasible(rows, x0, opts.feasibility_tol));
    let mut x = match start {
        Some(x0) => x0,
        None => match feasible_point(rows, n, opts)? {
            Some(x0) => x0,
            None => return Ok(Core { x: DVector::from_element(n, f64::NAN), duals: vec![], status: Status::Infeasible, iterations: 0 }),
        },
    };

    let scale = 1.0 + p.abs().max();
    let mut work: Vec<usize> = Vec::new();
    let mut z = null_space(rows, &work, n);
    let tight = |r: &Row, x: &DVector<f64>| (r.a.dot(x) - r.b).abs() <= opts.feasibility_tol * (1.0 + r.b.abs());
    for eq_pass in [true, false] {
        for (i, r) in rows.iter().enumerate() {
            if r.eq == eq_pass && (r.eq || tight(r, &x)) && independent(&z, &r.a) {
                work.push(i);
                z = null_space(rows, &work, n);
            }
        }
    }

    let mut iterations = 0;
    loop {
        if iterations >= opts.max_iterations {
            return Ok(Core { x, duals: vec![], status: Status::IterationLimit, iterations });
        }
        iterations += 1;
        let g = p * &x + q;
        let gnorm = g.amax().max(1.0);

        // search direction in the null space of the working set
        let mut ray = false;
        let d = if z.ncols() == 0 {
            DVector::zeros(n)
        } else {
            let gz = z.transpose() * &g;
            let h = z.transpose() * p * &z;
            let eig = SymmetricEigen::new(h);
            let thr = 1e-10 * scale;
            let mut newton = DVector::zeros(z.ncols());
            let mut flat = DVector::zeros(z.ncols());
            for k in 0..z.ncols() {
                let v = eig.eigenvectors.column(k);
                let c = v.dot(&gz);
                if eig.eigenvalues[k] > thr {
                    newton -= v * (c / eig.eigenvalues[k]);
                } else {
                    flat -= v * c;
                }
            }
            if flat.norm() > 1e-9 * gnorm {
                ray = true;
                &z * flat
            } else {
                &z * newton
            }
        };

        if !ray && d.norm() <= 1e-11 * (1.0 + x.norm()) {
            let lam = multipliers(rows, &work, &g);
            let worst = work
                .iter()
                .enumerate()
                .filter(|(_, &i)| !rows[i].eq)
                .map(|(k, _)| (k, lam[k]))
                .filter(|&(_, l)| l < -1e-9 * gnorm)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                None => {
                    let mut duals = vec![0.0; rows.len()];
                    for (k, &i) in work.iter().enumerate() {
                        duals[i] = if rows[i].eq { lam[k] } else { lam[k].max(0.0) };
                    }
                    return Ok(Core { x, duals, status: Status::Optimal, iterations });
                }
                Some((k, _)) => {
                    work.remove(k);
                    z = null_space(rows, &work, n);
                    continue;
                }
            }
        }

        let mut step = if ray { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        for (i, r) in rows.iter().enumerate() {
            if r.eq || work.contains(&i) {
                continue;
            }
            let ad = r.a.dot(&d);
            if ad <= 1e-12 * r.a.norm() * d.norm() {
                continue;
            }
            let alpha = ((r.b - r.a.dot(&x)) / ad).max(0.0);
            if alpha < step {
                step = alpha;
                blocking = Some(i);
            }
        }
        if step.is_infinite() {
            return Ok(Core { x, duals: vec![], status: Status::Unbounded, iterations });
        }
        x += &d * step;
        if let Some(i) = blocking {
            work.push(i);
            z = null_space(rows, &work, n);
        }
    }
}

/// Primal active-set method for `min ½xᵀPx + qᵀx` subject to affine
/// constraints, `P` symmetric positive semidefinite.
///
/// Duals satisfy `Px + q + Σ λ_i a_i = 0` with `λ_i ≥ 0` for inequalities.
/// When `P` is singular the optimal set may contain more than one point; the
/// returned `x` is then its minimum-norm element.
pub fn active_set_qp(
    p: &DMatrix<f64>,
    q: &[f64],
    constraints: &[Constraint],
    opts: &SolverOptions,
) -> Result<Solution, SolverError> {
    opts.validate()?;
    let n = q.len();
    if p.nrows() != n || p.ncols() != n {
        return Err(SolverError::Dimension(format!("P is {}x{}, expected {n}x{n}", p.nrows(), p.ncols())));
    }
    if p.iter().chain(q).any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite);
    }
    let scale = 1.0 + p.abs().max();
    if (p - p.transpose()).abs().max() > 1e-9 * scale {
        return Err(SolverError::Unsupported("P must be symmetric"));
    }
    let p = (p + p.transpose()) * 0.5;
    let rows = rows_of(constraints, n)?;
    let eig = SymmetricEigen::new(p.clone());
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if n > 0 && min_eig < -1e-10 * scale {
        return Err(SolverError::NotPsd(min_eig));
    }
    let qv = DVector::from_column_slice(q);
    let core = solve_core(&p, &qv, &rows, opts)?;
    if core.status != Status::Optimal {
        return Ok(Solution::failed(core.status, n, core.iterations));
    }
    let mut x = core.x;
    let mut iterations = core.iterations;

    // Singular P: the optimal set is {x feasible : Px = Px*, qᵀx = qᵀx*}.
    let thr = 1e-10 * scale;
    if eig.eigenvalues.iter().any(|&l| l <= thr) {
        let mut fixed = rows.clone();
        let mut q_null = qv.clone();
        for k in 0..n {
            let v: DVector<f64> = eig.eigenvectors.column(k).into();
            if eig.eigenvalues[k] > thr {
                q_null -= &v * v.dot(&qv);
                fixed.push(Row { b: v.dot(&x), a: v, eq: true });
            }
        }
        if q_null.norm() > 1e-12 * (1.0 + qv.norm()) {
            fixed.push(Row { b: q_null.dot(&x), a: q_null, eq: true });
        }
        let sub = SolverOptions { initial_point: Some(x.iter().copied().collect()), ..opts.clone() };
        let second = solve_core(&DMatrix::identity(n, n), &DVector::zeros(n), &fixed, &sub)?;
        iterations += second.iterations;
        if second.status == Status::Optimal {
            x = second.x;
        }
    }

    let objective_value = 0.5 * x.dot(&(&p * &x)) + qv.dot(&x);
    Ok(Solution {
        x: x.iter().copied().collect(),
        objective_value,
        dual_values: Some(core.duals),
        status: Status::Optimal,
        iterations,
    })
}
