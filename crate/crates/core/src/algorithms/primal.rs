use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::dual::constraint_coupled;
use super::{vectors, Algorithm, AlgorithmError, Record};
use crate::agent::Agent;
use crate::comms::Tensor;
use crate::functions::{Constraint, Expression};
use crate::problem::{solve, ConstraintCoupledLocal, Problem};
use crate::solvers::SolverOptions;

/// Penalty on the allocation slack unless overridden.
pub const DEFAULT_PENALTY: f64 = 1e3;

/// Distributed primal decomposition. Agent `i` holds an allocation `y_i`
/// (with `Σ_i y_i⁰ = 0`), solves
/// `min f_i(x) + Mρ  s.t.  x ∈ X_i, g_i(x) ≤ y_i + ρ·1, ρ ≥ 0`,
/// takes `μ_i` as the multiplier of the allocation rows and moves
/// `y_i ← y_i + α Σ_{j ∈ N_i} (μ_i − μ_j)`. Needs an undirected graph; the
/// pairwise antisymmetric update keeps `Σ_i y_i` fixed.
#[derive(Debug, Clone)]
pub struct PrimalDecomposition {
    penalty: f64,
    y: Vec<f64>,
    mu: Vec<f64>,
    x: Vec<f64>,
    rho: f64,
}

impl Default for PrimalDecomposition {
    fn default() -> Self {
        Self::with_penalty(DEFAULT_PENALTY)
    }
}

impl PrimalDecomposition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_penalty(m: f64) -> Self {
        Self { penalty: m, y: Vec::new(), mu: Vec::new(), x: Vec::new(), rho: 0.0 }
    }

    pub fn allocation(&self) -> &[f64] {
        &self.y
    }

    fn record(&self, agent: &Agent, l: &ConstraintCoupledLocal, round: u64) -> Result<Record, AlgorithmError> {
        Ok(Record {
            round,
            agent_id: agent.id(),
            local_cost: l.f.value(&self.x)?,
            iterate: self.x.clone(),
            aux: self.y.iter().chain(&self.mu).chain([&self.rho]).copied().collect(),
        })
    }

    /// Solves the relaxed local problem at the current allocation.
    fn local_solve(&mut self, l: &ConstraintCoupledLocal, round: u64) -> Result<(), AlgorithmError> {
        let d = l.dim();
        let s = l.coupling_dim();
        let (p, q, r) = l.f.as_quadratic().ok_or_else(|| {
            AlgorithmError::Setup("primal decomposition needs a linear or quadratic local cost".into())
        })?;
        let mut pz = DMatrix::zeros(d + 1, d + 1);
        pz.view_mut((0, 0), (d, d)).copy_from(&p);
        let mut qz = q;
        qz.push(self.penalty);
        let obj = Expression::quadratic(pz, qz, r)?;

        let pad = |a: &[f64], last: f64| a.iter().copied().chain([last]).collect::<Vec<f64>>();
        let mut cons: Vec<Constraint> = l
            .x_i
            .iter()
            .map(|c| {
                let (a, b) = c.affine_row().expect("local sets are affine");
                if c.is_equality() {
                    Constraint::eq(pad(a, 0.0), b)
                } else {
                    Constraint::le(pad(a, 0.0), b)
                }
            })
            .collect();
        let first = cons.len();
        let (g, g0) = l.g.as_affine().expect("coupling is affine");
        for k in 0..s {
            let row: Vec<f64> = g.row(k).iter().copied().collect();
            cons.push(Constraint::le(pad(&row, -1.0), self.y[k] - g0[k]));
        }
        let mut e = vec![0.0; d + 1];
        e[d] = 1.0;
        cons.push(Constraint::ge(e, 0.0));

        let sol = solve(&Problem::new(obj, cons)?, &SolverOptions::default())?;
        if !sol.is_optimal() {
            return Err(AlgorithmError::LocalSolve { round, status: sol.status });
        }
        let duals = sol.dual_values.as_ref().expect("affine problems report duals");
        self.mu = duals[first..first + s].iter().map(|v| v.max(0.0)).collect();
        self.rho = sol.x[d];
        self.x = sol.x[..d].to_vec();
        Ok(())
    }
}

impl Algorithm for PrimalDecomposition {
    fn name(&self) -> &'static str {
        "primal_decomposition"
    }

    fn init(&mut self, agent: &mut Agent) -> Result<Record, AlgorithmError> {
        if agent.in_neighbors() != agent.out_neighbors() {
            return Err(AlgorithmError::Setup("primal decomposition needs an undirected graph".into()));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(AlgorithmError::Setup(format!("penalty must be positive, got {}", self.penalty)));
        }
        let l = constraint_coupled(agent)?.clone();
        self.y = vec![0.0; l.coupling_dim()];
        self.local_solve(&l, 0)?;
        self.record(agent, &l, 0)
    }

    fn iterate(&mut self, agent: &mut Agent, t: u64, alpha: f64) -> Result<Record, AlgorithmError> {
        let s = self.mu.len();
        let payloads: BTreeMap<usize, Vec<Tensor>> =
            agent.out_neighbors().iter().map(|&j| (j, vec![Tensor::vector(self.mu.clone())])).collect();
        let received = agent.neighbors_exchange_keyed(&payloads)?;
        let [mus]: [_; 1] = vectors(received, 1, s)?.try_into().expect("one slot");
        for (_, mu_j) in mus {
            for k in 0..s {
                self.y[k] += alpha * (self.mu[k] - mu_j[k]);
            }
        }
        let l = constraint_coupled(agent)?.clone();
        self.local_solve(&l, t)?;
        self.record(agent, &l, t)
    }
}
