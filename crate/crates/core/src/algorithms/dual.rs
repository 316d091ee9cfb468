use super::{mix, vectors, Algorithm, AlgorithmError, Record};
use crate::agent::Agent;
use crate::comms::Tensor;
use crate::functions::Expression;
use crate::problem::{solve, ConstraintCoupledLocal, LocalData, Problem};
use crate::solvers::SolverOptions;

/// Distributed dual subgradient on `Σ_i g_i(x_i) ≤ 0`:
/// `ν = Σ_j a_ij μ_j`, `x = argmin_{X_i} f_i + νᵀg_i`,
/// `μ ← max(0, ν + α g_i(x))`. The primal estimate is the running average
/// of the local minimizers; raw `x` and `μ` are logged as auxiliary data.
#[derive(Debug, Clone, Default)]
pub struct DualSubgradient {
    mu: Vec<f64>,
    x: Vec<f64>,
    avg: Vec<f64>,
    count: u64,
}

impl DualSubgradient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    fn record(&self, agent: &Agent, l: &ConstraintCoupledLocal, round: u64) -> Result<Record, AlgorithmError> {
        Ok(Record {
            round,
            agent_id: agent.id(),
            local_cost: l.f.value(&self.avg)?,
            iterate: self.avg.clone(),
            aux: self.x.iter().chain(&self.mu).copied().collect(),
        })
    }
}

pub(super) fn constraint_coupled(agent: &Agent) -> Result<&ConstraintCoupledLocal, AlgorithmError> {
    match agent.local_data()? {
        LocalData::ConstraintCoupled(l) => Ok(l),
        other => Err(AlgorithmError::Setup(format!("expected constraint-coupled data, agent {} has {}", agent.id(), other.kind_name()))),
    }
}

/// `argmin_{x ∈ X_i} f_i(x) + νᵀ g_i(x)`.
fn lagrangian_argmin(l: &ConstraintCoupledLocal, nu: &[f64], round: u64) -> Result<Vec<f64>, AlgorithmError> {
    let (g, g0) = l.g.as_affine().expect("coupling is affine");
    let c: Vec<f64> = (0..l.dim()).map(|k| g.column(k).iter().zip(nu).map(|(a, b)| a * b).sum()).collect();
    let r: f64 = g0.iter().zip(nu).map(|(a, b)| a * b).sum();
    let obj = l.f.clone() + Expression::linear(&c, r);
    let s = solve(&Problem::new(obj, l.x_i.clone())?, &SolverOptions::default())?;
    if !s.is_optimal() {
        return Err(AlgorithmError::LocalSolve { round, status: s.status });
    }
    Ok(s.x)
}

impl Algorithm for DualSubgradient {
    fn name(&self) -> &'static str {
        "dual_subgradient"
    }

    fn init(&mut self, agent: &mut Agent) -> Result<Record, AlgorithmError> {
        let l = constraint_coupled(agent)?.clone();
        self.mu = vec![0.0; l.coupling_dim()];
        self.x = lagrangian_argmin(&l, &self.mu, 0)?;
        self.avg = self.x.clone();
        self.count = 0;
        self.record(agent, &l, 0)
    }

    fn iterate(&mut self, agent: &mut Agent, t: u64, alpha: f64) -> Result<Record, AlgorithmError> {
        let s = self.mu.len();
        let received = agent.neighbors_exchange(&[Tensor::vector(self.mu.clone())])?;
        let [mus]: [_; 1] = vectors(received, 1, s)?.try_into().expect("one slot");
        let nu = mix(agent, &self.mu, &mus);
        let l = constraint_coupled(agent)?.clone();
        self.x = lagrangian_argmin(&l, &nu, t)?;
        let gx = l.g.eval(&self.x)?;
        self.mu = nu.iter().zip(&gx).map(|(n, g)| (n + alpha * g).max(0.0)).collect();
        // average over x¹..x^t; x⁰ only seeds the estimate
        self.count += 1;
        let w = 1.0 / self.count as f64;
        if self.count == 1 {
            self.avg = self.x.clone();
        } else {
            for (a, x) in self.avg.iter_mut().zip(&self.x) {
                *a += w * (x - *a);
            }
        }
        self.record(agent, &l, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::testutil::{complete, simulate};
    use crate::algorithms::StepSize;
    use crate::functions::Constraint;
    use nalgebra::DMatrix;

    fn toy(c: f64, g0: f64) -> LocalData {
        let g = Expression::affine(DMatrix::from_element(1, 1, -1.0), vec![g0]).unwrap();
        LocalData::ConstraintCoupled(ConstraintCoupledLocal::new(Expression::linear(&[c], 0.0), Constraint::box_bounds(&[0.0], &[1.0]), g).unwrap())
    }

    fn grid_optimum() -> f64 {
        // brute force over [0,1]² for min x1 + 2 x2 s.t. x1 + x2 ≥ 1
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let (a, b) = (i as f64 / 200.0, j as f64 / 200.0);
                if a + b >= 1.0 - 1e-12 {
                    best = best.min(a + 2.0 * b);
                }
            }
        }
        best
    }

    #[test]
    fn toy_running_average_converges() {
        let opt = grid_optimum();
        assert!((opt - 1.0).abs() < 1e-12);
        let hs: Vec<_> = simulate(&complete(2), vec![toy(1.0, 0.5), toy(2.0, 0.5)], |_| DualSubgradient::new(), 20_000, StepSize::Diminishing(0.6))
            .into_iter()
            .map(Result::unwrap)
            .collect();
        let last: Vec<_> = hs.iter().map(|h| h.last().unwrap()).collect();
        let cost: f64 = last.iter().map(|r| r.local_cost).sum();
        let coupling: f64 = last.iter().map(|r| 0.5 - r.iterate[0]).sum();
        assert!((cost - opt).abs() < 5e-2, "cost {cost}");
        assert!(coupling < 1e-2, "coupling {coupling}");
        for h in &hs {
            assert!(h.records.iter().all(|r| r.aux[1] >= 0.0));
            // dual stays bounded relative to the optimum μ* = 1
            assert!(h.records.iter().all(|r| r.aux[1] < 10.0));
        }
    }

    #[test]
    fn inactive_coupling_keeps_zero_dual() {
        // g_i(x) = x − 2 < 0 on [0, 1]
        let data = |c: f64| {
            let g = Expression::affine(DMatrix::from_element(1, 1, 1.0), vec![-2.0]).unwrap();
            LocalData::ConstraintCoupled(ConstraintCoupledLocal::new(Expression::linear(&[c], 0.0), Constraint::box_bounds(&[0.0], &[1.0]), g).unwrap())
        };
        let hs = simulate(&complete(3), vec![data(1.0), data(-1.0), data(2.0)], |_| DualSubgradient::new(), 50, StepSize::Diminishing(0.6));
        for h in hs {
            let h = h.unwrap();
            assert!(h.records.iter().all(|r| r.aux[1] == 0.0));
        }
    }

    #[test]
    fn wrong_setup_is_rejected() {
        let data = LocalData::CostCoupled(crate::problem::CostCoupledLocal::new(Expression::linear(&[1.0], 0.0), vec![]).unwrap());
        let res = simulate(&complete(1), vec![data], |_| DualSubgradient::new(), 1, StepSize::Constant(1.0));
        assert!(matches!(res[0], Err(AlgorithmError::Setup(_))));
    }
}
