//! Synthetic instances and the local problems built from them.

use nalgebra::DMatrix;
use rand::Rng;

use super::ExperimentError;
use crate::functions::{logistic_loss_term, margin_constraint, Constraint, Expression};
use crate::problem::{solve, ConstraintCoupledLocal, Problem};
use crate::rng::{agent_rng, box_muller, derive_seed};
use crate::solvers::SolverOptions;

/// Mean of the class labelled `+1`.
pub const MEAN_POS: [f64; 2] = [0.0, 0.0];
/// Mean of the class labelled `-1`.
pub const MEAN_NEG: [f64; 2] = [3.0, 2.0];
/// Point-count range per agent.
pub const MIN_POINTS: usize = 4;
pub const MAX_POINTS: usize = 10;
/// Covariance scale of the SVM clusters, chosen so hard-margin data is common.
pub const SVM_VARIANCE: f64 = 0.2;
/// Redraw budget for inseparable or infeasible draws.
pub const MAX_REDRAWS: u64 = 100;

/// One agent's labelled points in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationData {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<f64>,
}

impl ClassificationData {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn draw_classes(n: usize, seed: u64, variance: f64) -> Vec<ClassificationData> {
    let sd = variance.sqrt();
    (0..n)
        .map(|i| {
            let mut rng = agent_rng(seed, i);
            let m = rng.random_range(MIN_POINTS..=MAX_POINTS);
            let mut points = Vec::with_capacity(m);
            let mut labels = Vec::with_capacity(m);
            for _ in 0..m {
                let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mean = if label > 0.0 { MEAN_POS } else { MEAN_NEG };
                let (z0, z1) = box_muller(&mut rng);
                points.push([mean[0] + sd * z0, mean[1] + sd * z1]);
                labels.push(label);
            }
            ClassificationData { points, labels }
        })
        .collect()
}

fn both_labels(data: &[ClassificationData]) -> bool {
    let all = || data.iter().flat_map(|d| d.labels.iter());
    all().any(|&l| l > 0.0) && all().any(|&l| l < 0.0)
}

/// Gaussian clusters with identity covariance, `m_i ∈ [4, 10]` points per
/// agent, each agent drawing from its own stream. Redrawn (with a derived
/// seed) in the rare case one label is missing globally.
pub fn gen_classification(n: usize, seed: u64) -> Result<Vec<ClassificationData>, ExperimentError> {
    for attempt in 0..MAX_REDRAWS {
        let s = if attempt == 0 { seed } else { derive_seed(seed, attempt) };
        let data = draw_classes(n, s, 1.0);
        if both_labels(&data) {
            return Ok(data);
        }
    }
    Err(ExperimentError::Generator(format!("no draw with both labels after {MAX_REDRAWS} attempts")))
}

/// Like [`gen_classification`] with covariance `0.2·I`, redrawn until the
/// pooled hard-margin problem is feasible.
pub fn gen_svm(n: usize, seed: u64) -> Result<Vec<ClassificationData>, ExperimentError> {
    for attempt in 0..MAX_REDRAWS {
        let s = if attempt == 0 { seed } else { derive_seed(seed, attempt) };
        let data = draw_classes(n, s, SVM_VARIANCE);
        if both_labels(&data) && separable(&data)? {
            return Ok(data);
        }
    }
    Err(ExperimentError::Generator(format!("data not separable after {MAX_REDRAWS} redraws")))
}

fn separable(data: &[ClassificationData]) -> Result<bool, ExperimentError> {
    let cons: Vec<Constraint> = data.iter().map(svm_constraints).collect::<Result<Vec<_>, _>>()?.concat();
    let s = solve(&Problem::new(Expression::linear(&[0.0; 3], 0.0), cons)?, &SolverOptions::default())?;
    Ok(s.is_optimal())
}

/// `f_i(w, b) = Σ_j log(1 + exp(−ℓ_j(wᵀp_j + b))) + C/(2N)‖w‖²`.
pub fn local_logistic_objective(data: &ClassificationData, n: usize, c: f64) -> Result<Expression, ExperimentError> {
    let mut terms = data.points.iter().zip(&data.labels).map(|(p, &l)| logistic_loss_term(p, l)).collect::<Result<Vec<_>, _>>()?;
    let reg = Expression::squared_norm(Expression::select(3, &[0, 1]))?;
    terms.push(Expression::scale(c / (2.0 * n as f64), reg));
    Ok(Expression::sum(terms)?)
}

/// `½‖w‖²` over `(w, b)`.
pub fn svm_objective() -> Expression {
    let p = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0]));
    Expression::quadratic(p, vec![0.0; 3], 0.0).expect("symmetric")
}

/// Hard-margin rows `ℓ_j(wᵀp_j + b) ≥ 1`.
pub fn svm_constraints(data: &ClassificationData) -> Result<Vec<Constraint>, ExperimentError> {
    Ok(data.points.iter().zip(&data.labels).map(|(p, &l)| margin_constraint(p, l)).collect::<Result<Vec<_>, _>>()?)
}

/// Largest margin violation over all points, `max_j (1 − ℓ_j(wᵀp_j + b))`;
/// zero at the SVM optimum, where support vectors are tight.
pub fn svm_violation(points: &[[f64; 2]], labels: &[f64], w: &[f64], b: f64) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, l)| 1.0 - l * (w[0] * p[0] + w[1] * p[1] + b))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Tunable ranges of the microgrid family.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrogridParams {
    pub a_range: (f64, f64),
    pub x0_range: (f64, f64),
    pub u_bounds: (f64, f64),
    /// Per-unit utility `c_i` range; the stage cost is `−c_i u_i(k)`.
    pub cost_range: (f64, f64),
    /// `h_k = budget_factor · N`.
    pub budget_factor: f64,
}

impl Default for MicrogridParams {
    fn default() -> Self {
        Self { a_range: (0.8, 1.0), x0_range: (0.0, 1.0), u_bounds: (0.0, 1.0), cost_range: (0.05, 0.1), budget_factor: 0.95 }
    }
}

/// One unit: `x(k+1) = A x(k) + B u(k)`, consumption `C x(k) + D u(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrogridData {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub x0: f64,
    pub u_lo: f64,
    pub u_hi: f64,
    pub cost: f64,
    /// Shared budget `h ∈ R^S`.
    pub h: Vec<f64>,
    /// Number of units the budget is split over.
    pub n: usize,
}

impl MicrogridData {
    pub fn horizon(&self) -> usize {
        self.h.len()
    }
}

pub fn gen_microgrid(n: usize, s: usize, seed: u64, params: &MicrogridParams) -> Result<Vec<MicrogridData>, ExperimentError> {
    if n == 0 || s == 0 {
        return Err(ExperimentError::Generator("microgrid needs N, S ≥ 1".into()));
    }
    let uniform = |rng: &mut rand_chacha::ChaCha8Rng, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    for attempt in 0..MAX_REDRAWS {
        let sd = if attempt == 0 { seed } else { derive_seed(seed, attempt) };
        let h = vec![params.budget_factor * n as f64; s];
        let data: Vec<MicrogridData> = (0..n)
            .map(|i| {
                let mut rng = agent_rng(sd, i);
                MicrogridData {
                    a: uniform(&mut rng, params.a_range),
                    b: 1.0,
                    c: 0.0,
                    d: 1.0,
                    x0: uniform(&mut rng, params.x0_range),
                    u_lo: params.u_bounds.0,
                    u_hi: params.u_bounds.1,
                    cost: uniform(&mut rng, params.cost_range),
                    h: h.clone(),
                    n,
                }
            })
            .collect();
        if super::oracle::microgrid_oracle(&data).is_ok() {
            return Ok(data);
        }
    }
    Err(ExperimentError::Generator(format!("no feasible microgrid after {MAX_REDRAWS} draws")))
}

/// Decision vector `(x(1..S), u(0..S−1))`; dynamics as equalities, input
/// bounds, and `g_k = C x(k) + D u(k) − h_k/N` with `x(0)` fixed.
pub fn local_microgrid_problem(m: &MicrogridData) -> Result<ConstraintCoupledLocal, ExperimentError> {
    let s = m.horizon();
    let dim = 2 * s;
    let xi = |k: usize| k - 1;
    let ui = |k: usize| s + k;
    let mut cons = Vec::with_capacity(3 * s);
    for k in 0..s {
        let mut row = vec![0.0; dim];
        row[xi(k + 1)] = 1.0;
        row[ui(k)] = -m.b;
        let rhs = if k == 0 {
            m.a * m.x0
        } else {
            row[xi(k)] = -m.a;
            0.0
        };
        cons.push(Constraint::eq(row, rhs));
    }
    let mut lo = vec![f64::NEG_INFINITY; dim];
    let mut hi = vec![f64::INFINITY; dim];
    for k in 0..s {
        lo[ui(k)] = m.u_lo;
        hi[ui(k)] = m.u_hi;
    }
    for k in 0..s {
        let mut e = vec![0.0; dim];
        e[ui(k)] = 1.0;
        cons.push(Constraint::ge(e.clone(), lo[ui(k)]));
        cons.push(Constraint::le(e, hi[ui(k)]));
    }
    let mut g = DMatrix::zeros(s, dim);
    let mut g0 = vec![0.0; s];
    for k in 0..s {
        g[(k, ui(k))] = m.d;
        if k == 0 {
            g0[k] += m.c * m.x0;
        } else {
            g[(k, xi(k))] = m.c;
        }
        g0[k] -= m.h[k] / m.n as f64;
    }
    let mut cost = vec![0.0; dim];
    for k in 0..s {
        cost[ui(k)] = -m.cost;
    }
    Ok(ConstraintCoupledLocal::new(Expression::linear(&cost, 0.0), cons, Expression::affine(g, g0)?)?)
}
