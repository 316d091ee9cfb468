use nalgebra::{DMatrix, DVector};

use super::{Solution, SolverError, SolverOptions, Status};

/// Entry threshold for reduced costs and pivot elements.
const EPS_REDUCED: f64 = 1e-10;
const EPS_PIVOT: f64 = 1e-10;
/// Reduced costs above this are treated as strictly positive when fixing
/// columns to the optimal face.
const EPS_FACE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// `min cᵀx  s.t.  a_i x (≤|=|≥) b_i,  lower ≤ x ≤ upper` with possibly
/// infinite bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLP {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub senses: Vec<RowSense>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StandardFormLP {
    /// No rows, all variables free.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a: Vec::new(),
            b: Vec::new(),
            senses: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    /// No rows, all variables `≥ 0`.
    pub fn nonnegative(c: Vec<f64>) -> Self {
        let n = c.len();
        Self { lower: vec![0.0; n], ..Self::new(c) }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn add_row(&mut self, a: Vec<f64>, sense: RowSense, b: f64) -> &mut Self {
        self.a.push(a);
        self.senses.push(sense);
        self.b.push(b);
        self
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.n();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(SolverError::Dimension(format!("bounds must have length {n}")));
        }
        if self.b.len() != self.m() || self.senses.len() != self.m() {
            return Err(SolverError::Dimension("row count disagrees between a, b and senses".into()));
        }
        if let Some(r) = self.a.iter().position(|row| row.len() != n) {
            return Err(SolverError::Dimension(format!("row {r} has length {}, expected {n}", self.a[r].len())));
        }
        let finite = self.c.iter().chain(self.b.iter()).chain(self.a.iter().flatten()).all(|v| v.is_finite());
        if !finite || self.lower.iter().chain(&self.upper).any(|v| v.is_nan()) {
            return Err(SolverError::NonFinite);
        }
        Ok(())
    }

    /// Objective value at `x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

/// How an original variable is expressed in nonnegative internal columns:
/// `x = offset + Σ sign · col`.
#[derive(Debug, Clone)]
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

#[derive(Debug)]
struct Tableau {
    m: usize,
    ncols: usize,
    /// `m × (ncols + 1)` row-major, last column is the right side.
    t: Vec<f64>,
    /// Reduced costs, last entry is `-z`.
    obj: Vec<f64>,
    basis: Vec<usize>,
    blocked: Vec<bool>,
    /// Internal row index for each tableau row (rows can be dropped).
    row_ids: Vec<usize>,
}

impl Tableau {
    fn w(&self) -> usize {
        self.ncols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.w() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.ncols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.w();
        let piv = self.t[r * w + c];
        let row: Vec<f64> = self.t[r * w..(r + 1) * w].iter().map(|v| v / piv).collect();
        self.t[r * w..(r + 1) * w].copy_from_slice(&row);
        self.t[r * w + c] = 1.0;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f != 0.0 {
                for (k, rv) in row.iter().enumerate() {
                    self.t[i * w + k] -= f * rv;
                }
                self.t[i * w + c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (k, rv) in row.iter().enumerate() {
                self.obj[k] -= f * rv;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.w();
        let mut obj = vec![0.0; w];
        obj[..self.ncols].copy_from_slice(cost);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (k, o) in obj.iter_mut().enumerate() {
                    *o -= cb * self.t[r * w + k];
                }
            }
        }
        for &b in &self.basis {
            obj[b] = 0.0;
        }
        self.obj = obj;
    }

    /// Bland's rule: lowest-index improving column enters; among tied ratios
    /// the row whose basic variable has the lowest index leaves.
    fn run(&mut self, max_iter: usize, iters: &mut usize) -> Result<(), Status> {
        loop {
            let Some(enter) = (0..self.ncols).find(|&j| !self.blocked[j] && self.obj[j] < -EPS_REDUCED) else {
                return Ok(());
            };
            if *iters >= max_iter {
                return Err(Status::IterationLimit);
            }
            *iters += 1;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, enter);
                if a <= EPS_PIVOT {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, best)) => {
                        if ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[r] < self.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else { return Err(Status::Unbounded) };
            self.pivot(r, enter);
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.w();
        self.t.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.row_ids.remove(r);
        self.m -= 1;
    }

    fn column_values(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.ncols];
        for r in 0..self.m {
            v[self.basis[r]] = self.rhs(r);
        }
        v
    }
}

/// Everything needed to map between the user LP and the internal
/// equality-form tableau.
struct Prepared {
    maps: Vec<VarMap>,
    n_struct: usize,
    /// Internal equality rows over all columns (flipped so rhs ≥ 0).
    a_int: Vec<Vec<f64>>,
    /// `±1`: the sign applied to each internal row.
    flip: Vec<f64>,
    /// Number of internal rows coming from user rows (bound rows follow).
    user_rows: usize,
    art_start: usize,
    ncols: usize,
    cost: Vec<f64>,
}

fn prepare(lp: &StandardFormLP) -> Prepared {
    let n = lp.n();
    let mut maps = Vec::with_capacity(n);
    let mut n_struct = 0;
    // bound rows: (column, rhs) meaning col ≤ rhs
    let mut bound_rows = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let map = match (lo.is_finite(), hi.is_finite()) {
            (true, _) => {
                if hi.is_finite() {
                    bound_rows.push((n_struct, hi - lo));
                }
                VarMap { offset: lo, cols: vec![(n_struct, 1.0)] }
            }
            (false, true) => VarMap { offset: hi, cols: vec![(n_struct, -1.0)] },
            (false, false) => {
                n_struct += 1;
                VarMap { offset: 0.0, cols: vec![(n_struct - 1, 1.0), (n_struct, -1.0)] }
            }
        };
        n_struct += 1;
        maps.push(map);
    }

    struct Row {
        coef: Vec<f64>,
        sense: RowSense,
        rhs: f64,
    }
    let mut rows = Vec::with_capacity(lp.m() + bound_rows.len());
    for i in 0..lp.m() {
        let mut coef = vec![0.0; n_struct];
        let mut rhs = lp.b[i];
        for (j, map) in maps.iter().enumerate() {
            let a = lp.a[i][j];
            if a == 0.0 {
                continue;
            }
            rhs -= a * map.offset;
            for &(col, s) in &map.cols {
                coef[col] += a * s;
            }
        }
        rows.push(Row { coef, sense: lp.senses[i], rhs });
    }
    for &(col, ub) in &bound_rows {
        let mut coef = vec![0.0; n_struct];
        coef[col] = 1.0;
        rows.push(Row { coef, sense: RowSense::Le, rhs: ub });
    }

    let n_slack = rows.iter().filter(|r| r.sense != RowSense::Eq).count();
    let mut flip = Vec::with_capacity(rows.len());
    let mut needs_art = Vec::with_capacity(rows.len());
    for row in &rows {
        let f = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        let slack_sign = match row.sense {
            RowSense::Le => 1.0,
            RowSense::Ge => -1.0,
            RowSense::Eq => 0.0,
        } * f;
        flip.push(f);
        needs_art.push(slack_sign <= 0.0);
    }
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let art_start = n_struct + n_slack;
    let ncols = art_start + n_art;
    let mut a_int = Vec::with_capacity(rows.len());
    let (mut s_idx, mut a_idx) = (n_struct, art_start);
    for (r, row) in rows.iter().enumerate() {
        let f = flip[r];
        let mut full = vec![0.0; ncols + 1];
        for (k, v) in row.coef.iter().enumerate() {
            full[k] = f * v;
        }
        match row.sense {
            RowSense::Le => {
                full[s_idx] = f;
                s_idx += 1;
            }
            RowSense::Ge => {
                full[s_idx] = -f;
                s_idx += 1;
            }
            RowSense::Eq => {}
        }
        if needs_art[r] {
            full[a_idx] = 1.0;
            a_idx += 1;
        }
        full[ncols] = f * row.rhs;
        a_int.push(full);
    }

    let mut cost = vec![0.0; ncols];
    for (j, map) in maps.iter().enumerate() {
        for &(col, s) in &map.cols {
            cost[col] += lp.c[j] * s;
        }
    }
    Prepared { maps, n_struct, a_int, flip, user_rows: lp.m(), art_start, ncols, cost }
}

fn initial_tableau(p: &Prepared) -> Tableau {
    let m = p.a_int.len();
    let mut t = Vec::with_capacity(m * (p.ncols + 1));
    let mut basis = Vec::with_capacity(m);
    for row in &p.a_int {
        t.extend_from_slice(row);
        // a +1 slack or artificial with no other row using it
        let b = (p.n_struct..p.ncols).find(|&c| row[c] == 1.0).expect("every row has a unit column");
        basis.push(b);
    }
    Tableau { m, ncols: p.ncols, t, obj: vec![0.0; p.ncols + 1], basis, blocked: vec![false; p.ncols], row_ids: (0..m).collect() }
}

/// Outcome of phases 1 and 2 on a prepared LP.
struct Phase2 {
    tab: Tableau,
    iterations: usize,
}

fn phase_one_two(p: &Prepared, opts: &SolverOptions) -> Result<Phase2, (Status, usize)> {
    let mut tab = initial_tableau(p);
    let mut iters = 0;
    let max_iter = opts.max_iterations;
    if p.art_start < p.ncols {
        let mut cost1 = vec![0.0; p.ncols];
        cost1[p.art_start..].iter_mut().for_each(|c| *c = 1.0);
        tab.set_objective(&cost1);
        tab.run(max_iter, &mut iters).map_err(|s| (s, iters))?;
        let scale = 1.0 + p.a_int.iter().map(|r| r[p.ncols].abs()).fold(0.0, f64::max);
        if -tab.obj[p.ncols] > opts.feasibility_tol * scale {
            return Err((Status::Infeasible, iters));
        }
        // drive artificials out of the basis; drop rows that turn out redundant
        let mut r = 0;
        while r < tab.m {
            if tab.basis[r] >= p.art_start {
                let col = (0..p.art_start).find(|&c| tab.at(r, c).abs() > 1e-9);
                match col {
                    Some(c) => tab.pivot(r, c),
                    None => {
                        tab.remove_row(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for c in p.art_start..p.ncols {
            tab.blocked[c] = true;
        }
    }
    tab.set_objective(&p.cost);
    tab.run(max_iter, &mut iters).map_err(|s| (s, iters))?;
    Ok(Phase2 { tab, iterations: iters })
}

fn recover_x(p: &Prepared, tab: &Tableau) -> Vec<f64> {
    let cols = tab.column_values();
    p.maps.iter().map(|m| m.offset + m.cols.iter().map(|&(c, s)| s * cols[c]).sum::<f64>()).collect()
}

/// Row duals `y` in the convention `c = Aᵀy + reduced costs`: `y ≤ 0` on `≤`
/// rows and `y ≥ 0` on `≥` rows at optimality.
fn row_duals(p: &Prepared, tab: &Tableau) -> Option<Vec<f64>> {
    let m = tab.m;
    let mut y_full = vec![0.0; p.a_int.len()];
    if m > 0 {
        let b = DMatrix::from_fn(m, m, |r, k| p.a_int[tab.row_ids[r]][tab.basis[k]]);
        let cb = DVector::from_iterator(m, tab.basis.iter().map(|&c| p.cost[c]));
        let y = b.transpose().lu().solve(&cb)?;
        for (r, &rid) in tab.row_ids.iter().enumerate() {
            y_full[rid] = p.flip[rid] * y[r];
        }
    }
    y_full.truncate(p.user_rows);
    Some(y_full)
}

/// Dense two-phase simplex. Duals are the row multipliers `y` with
/// `cᵀx = bᵀy` at optimality when all finite variable bounds are zero.
pub fn simplex(lp: &StandardFormLP, opts: &SolverOptions) -> Result<Solution, SolverError> {
    lp.validate()?;
    opts.validate()?;
    let p = prepare(lp);
    match phase_one_two(&p, opts) {
        Err((status, iters)) => Ok(Solution::failed(status, lp.n(), iters)),
        Ok(Phase2 { tab, iterations }) => {
            let x = recover_x(&p, &tab);
            Ok(Solution {
                objective_value: lp.objective(&x),
                x,
                dual_values: row_duals(&p, &tab),
                status: Status::Optimal,
                iterations,
            })
        }
    }
}

/// Among all optimal solutions, the lexicographically smallest: optimize
/// `cᵀx`, then minimize `x₁` over the optimal face, then `x₂`, and so on.
///
/// Each stage fixes every column with strictly positive reduced cost at zero,
/// which by complementary slackness describes the optimal face exactly.
pub fn lexicographic_solve(lp: &StandardFormLP, opts: &SolverOptions) -> Result<Solution, SolverError> {
    lp.validate()?;
    opts.validate()?;
    let p = prepare(lp);
    let Phase2 { mut tab, mut iterations } = match phase_one_two(&p, opts) {
        Err((status, iters)) => return Ok(Solution::failed(status, lp.n(), iters)),
        Ok(ph) => ph,
    };
    let duals = row_duals(&p, &tab);
    let fix_face = |tab: &mut Tableau| {
        for j in 0..tab.ncols {
            if tab.obj[j] > EPS_FACE {
                tab.blocked[j] = true;
            }
        }
    };
    fix_face(&mut tab);
    for map in &p.maps {
        let mut cost = vec![0.0; p.ncols];
        for &(c, s) in &map.cols {
            cost[c] = s;
        }
        tab.set_objective(&cost);
        if let Err(status) = tab.run(opts.max_iterations, &mut iterations) {
            return Ok(Solution::failed(status, lp.n(), iterations));
        }
        fix_face(&mut tab);
    }
    let x = recover_x(&p, &tab);
    Ok(Solution { objective_value: lp.objective(&x), x, dual_values: duals, status: Status::Optimal, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn single_tight_constraint() {
        let mut lp = StandardFormLP::nonnegative(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], RowSense::Ge, 1.0);
        let s = simplex(&lp, &opts()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = StandardFormLP::new(vec![1.0]);
        lp.add_row(vec![1.0], RowSense::Le, -1.0).add_row(vec![1.0], RowSense::Ge, 1.0);
        assert_eq!(simplex(&lp, &opts()).unwrap().status, Status::Infeasible);
        let lp = StandardFormLP::new(vec![1.0]);
        assert_eq!(simplex(&lp, &opts()).unwrap().status, Status::Unbounded);
        let mut lp = StandardFormLP::nonnegative(vec![-1.0, 0.0]);
        lp.add_row(vec![1.0, -1.0], RowSense::Le, 1.0);
        assert_eq!(simplex(&lp, &opts()).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn bounds_and_free_variables() {
        // min x1 + 2 x2, x ∈ [0,1]², x1 + x2 ≥ 1 → (1, 0)
        let mut lp = StandardFormLP::new(vec![1.0, 2.0]).with_bounds(vec![0.0; 2], vec![1.0; 2]);
        lp.add_row(vec![1.0, 1.0], RowSense::Ge, 1.0);
        let s = simplex(&lp, &opts()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && s.x[1].abs() < 1e-12);
        // upper-only bound: max x s.t. x ≤ 3 → 3
        let lp = StandardFormLP::new(vec![-1.0]).with_bounds(vec![f64::NEG_INFINITY], vec![3.0]);
        assert!((simplex(&lp, &opts()).unwrap().x[0] - 3.0).abs() < 1e-12);
        // free variable pushed negative by an equality
        let mut lp = StandardFormLP::new(vec![0.0, 1.0]);
        lp.add_row(vec![1.0, 0.0], RowSense::Eq, -2.5).add_row(vec![1.0, -1.0], RowSense::Le, 0.0);
        let s = simplex(&lp, &opts()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.x[0] + 2.5).abs() < 1e-12 && (s.x[1] + 2.5).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = StandardFormLP::nonnegative(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], RowSense::Eq, 2.0).add_row(vec![2.0, 2.0], RowSense::Eq, 4.0);
        let s = simplex(&lp, &opts()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling LP (cycles under the largest-coefficient rule).
        let mut lp = StandardFormLP::nonnegative(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_row(vec![0.25, -60.0, -0.04, 9.0], RowSense::Le, 0.0)
            .add_row(vec![0.5, -90.0, -0.02, 3.0], RowSense::Le, 0.0)
            .add_row(vec![0.0, 0.0, 1.0, 0.0], RowSense::Le, 1.0);
        let s = simplex(&lp, &opts()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective_value + 0.05).abs() < 1e-12);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let mut lp = StandardFormLP::nonnegative(vec![-1.0, -1.0]);
        lp.add_row(vec![1.0, 2.0], RowSense::Le, 4.0).add_row(vec![3.0, 1.0], RowSense::Le, 6.0);
        let o = SolverOptions { max_iterations: 1, ..opts() };
        assert_eq!(simplex(&lp, &o).unwrap().status, Status::IterationLimit);
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut lp = StandardFormLP::new(vec![1.0, 2.0]);
        lp.add_row(vec![1.0], RowSense::Le, 1.0);
        assert!(matches!(simplex(&lp, &opts()), Err(SolverError::Dimension(_))));
        let lp = StandardFormLP::new(vec![f64::NAN]);
        assert!(matches!(simplex(&lp, &opts()), Err(SolverError::NonFinite)));
    }

    #[test]
    fn lexicographic_examples() {
        let lp = StandardFormLP::new(vec![0.0, 0.0]).with_bounds(vec![0.0; 2], vec![1.0; 2]);
        let s = lexicographic_solve(&lp, &opts()).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
        let mut lp = StandardFormLP::new(vec![1.0, 1.0]).with_bounds(vec![0.0; 2], vec![1.0; 2]);
        lp.add_row(vec![1.0, 1.0], RowSense::Ge, 1.0);
        let s = lexicographic_solve(&lp, &opts()).unwrap();
        assert!(s.x[0].abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12, "{:?}", s.x);
        let mut lp = StandardFormLP::new(vec![1.0, 2.0]).with_bounds(vec![0.0; 2], vec![1.0; 2]);
        lp.add_row(vec![1.0, 1.0], RowSense::Ge, 1.0);
        assert_eq!(lexicographic_solve(&lp, &opts()).unwrap().x, simplex(&lp, &opts()).unwrap().x);
    }

    #[test]
    fn lexicographic_free_variables() {
        // min x s.t. x ≥ c_i for c = {1, 2, 5}
        let mut lp = StandardFormLP::new(vec![1.0]);
        for c in [1.0, 5.0, 2.0] {
            lp.add_row(vec![1.0], RowSense::Ge, c);
        }
        let s = lexicographic_solve(&lp, &opts()).unwrap();
        assert!((s.x[0] - 5.0).abs() < 1e-12);
    }

    /// Brute-force oracle: every vertex of `{x : rows, lo ≤ x ≤ hi}` is the
    /// solution of `n` tight constraints; the optimum is the best feasible one.
    fn vertex_enumeration(lp: &StandardFormLP) -> f64 {
        let n = lp.n();
        let mut cons: Vec<(Vec<f64>, f64)> = lp.a.iter().cloned().zip(lp.b.iter().copied()).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            cons.push((e.clone(), lp.lower[j]));
            cons.push((e, lp.upper[j]));
        }
        let feasible = |x: &[f64]| {
            let tol = 1e-9;
            lp.a.iter().zip(&lp.b).zip(&lp.senses).all(|((row, b), s)| {
                let v: f64 = row.iter().zip(x).map(|(a, y)| a * y).sum();
                match s {
                    RowSense::Le => v <= b + tol,
                    RowSense::Ge => v >= b - tol,
                    RowSense::Eq => (v - b).abs() <= tol,
                }
            }) && x.iter().zip(&lp.lower).zip(&lp.upper).all(|((v, l), u)| *v >= l - tol && *v <= u + tol)
        };
        let mut best = f64::INFINITY;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let m = DMatrix::from_fn(n, n, |r, c| cons[idx[r]].0[c]);
            let rhs = DVector::from_iterator(n, idx.iter().map(|&i| cons[i].1));
            if m.determinant().abs() > 1e-9 {
                if let Some(x) = m.lu().solve(&rhs) {
                    let x: Vec<f64> = x.iter().copied().collect();
                    if feasible(&x) {
                        best = best.min(lp.objective(&x));
                    }
                }
            }
            // next combination
            let k = cons.len();
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < k - n + i {
                    idx[i] += 1;
                    for t in i + 1..n {
                        idx[t] = idx[t - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn random_lp(rng: &mut ChaCha8Rng) -> StandardFormLP {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
        let mut lp = StandardFormLP::new(c).with_bounds(vec![-4.0; n], vec![4.0; n]);
        for _ in 0..m {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3..=3) as f64).collect();
            let sense = match rng.random_range(0..3) {
                0 => RowSense::Le,
                1 => RowSense::Ge,
                _ => RowSense::Le,
            };
            lp.add_row(a, sense, rng.random_range(-3..=6) as f64);
        }
        lp
    }

    #[test]
    fn matches_vertex_enumeration_on_random_lps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 50 {
            let lp = random_lp(&mut rng);
            let oracle = vertex_enumeration(&lp);
            let s = simplex(&lp, &opts()).unwrap();
            if oracle.is_infinite() {
                assert_eq!(s.status, Status::Infeasible);
                continue;
            }
            assert_eq!(s.status, Status::Optimal);
            assert!((s.objective_value - oracle).abs() < 1e-9, "{} vs {}", s.objective_value, oracle);
            checked += 1;
        }
    }

    #[test]
    fn strong_duality_on_random_lps() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0;
        while checked < 50 {
            let n = rng.random_range(1..=5);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let mut lp = StandardFormLP::nonnegative(c);
            for _ in 0..rng.random_range(1..=5) {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..3.0)).collect();
                let sense = if rng.random_bool(0.5) { RowSense::Le } else { RowSense::Ge };
                lp.add_row(a, sense, rng.random_range(-1.0..4.0));
            }
            // keep the feasible set bounded
            lp.add_row(vec![1.0; n], RowSense::Le, 10.0);
            let s = simplex(&lp, &opts()).unwrap();
            if s.status != Status::Optimal {
                continue;
            }
            let y = s.dual_values.as_ref().unwrap();
            let by: f64 = lp.b.iter().zip(y).map(|(b, y)| b * y).sum();
            assert!((s.objective_value - by).abs() < 1e-8);
            for (yi, sense) in y.iter().zip(&lp.senses) {
                match sense {
                    RowSense::Le => assert!(*yi <= 1e-12),
                    RowSense::Ge => assert!(*yi >= -1e-12),
                    RowSense::Eq => {}
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn lexicographic_is_row_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..40 {
            let lp = random_lp(&mut rng);
            let mut perm = lp.clone();
            let mut order: Vec<usize> = (0..lp.m()).collect();
            order.reverse();
            order.rotate_left(rng.random_range(0..lp.m().max(1)));
            perm.a = order.iter().map(|&i| lp.a[i].clone()).collect();
            perm.b = order.iter().map(|&i| lp.b[i]).collect();
            perm.senses = order.iter().map(|&i| lp.senses[i]).collect();
            let s1 = lexicographic_solve(&lp, &opts()).unwrap();
            let s2 = lexicographic_solve(&perm, &opts()).unwrap();
            assert_eq!(s1.status, s2.status);
            if s1.status == Status::Optimal {
                for (a, b) in s1.x.iter().zip(&s2.x) {
                    assert!((a - b).abs() < 1e-9, "{:?} vs {:?}", s1.x, s2.x);
                }
            }
        }
    }
}
