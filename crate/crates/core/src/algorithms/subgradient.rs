use super::{mix, vectors, Algorithm, AlgorithmError, Record};
use crate::agent::Agent;
use crate::comms::Tensor;
use crate::problem::{project, CostCoupledLocal, LocalData};

/// Consensus-subgradient: `z = Σ_j a_ij x_j`, `x ← P_X(z − α ∂f_i(z))`.
#[derive(Debug, Clone, Default)]
pub struct Subgradient {
    x0: Option<Vec<f64>>,
    x: Vec<f64>,
}

impl Subgradient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starting point (projected onto `X`); zero by default.
    pub fn with_initial(x0: Vec<f64>) -> Self {
        Self { x0: Some(x0), x: Vec::new() }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }
}

pub(super) fn cost_coupled(agent: &Agent) -> Result<&CostCoupledLocal, AlgorithmError> {
    match agent.local_data()? {
        LocalData::CostCoupled(l) => Ok(l),
        other => Err(AlgorithmError::Setup(format!("expected cost-coupled data, agent {} has {}", agent.id(), other.kind_name()))),
    }
}

impl Algorithm for Subgradient {
    fn name(&self) -> &'static str {
        "subgradient"
    }

    fn init(&mut self, agent: &mut Agent) -> Result<Record, AlgorithmError> {
        let local = cost_coupled(agent)?;
        let d = local.dim();
        let x0 = self.x0.clone().unwrap_or_else(|| vec![0.0; d]);
        if x0.len() != d {
            return Err(AlgorithmError::Setup(format!("initial point has length {}, expected {d}", x0.len())));
        }
        self.x = project(&local.x_set, &x0)?;
        Ok(Record { round: 0, agent_id: agent.id(), local_cost: local.f.value(&self.x)?, iterate: self.x.clone(), aux: vec![] })
    }

    fn iterate(&mut self, agent: &mut Agent, t: u64, alpha: f64) -> Result<Record, AlgorithmError> {
        let d = self.x.len();
        let received = agent.neighbors_exchange(&[Tensor::vector(self.x.clone())])?;
        let [xs]: [_; 1] = vectors(received, 1, d)?.try_into().expect("one slot");
        let z = mix(agent, &self.x, &xs);
        let local = cost_coupled(agent)?;
        let g = local.f.subgradient(&z)?;
        let step: Vec<f64> = z.iter().zip(&g).map(|(zk, gk)| zk - alpha * gk).collect();
        self.x = project(&local.x_set, &step)?;
        let cost = local.f.value(&self.x)?;
        Ok(Record { round: t, agent_id: agent.id(), local_cost: cost, iterate: self.x.clone(), aux: vec![] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::testutil::{complete, simulate};
    use crate::algorithms::{run, StepSize};
    use crate::comms::InProcNetwork;
    use crate::functions::{Constraint, Expression};
    use crate::graph::Graph;
    use nalgebra::DMatrix;
    use std::collections::BTreeSet;

    fn half_sq_dist(c: &[f64]) -> Expression {
        let d = c.len();
        let q: Vec<f64> = c.iter().map(|v| -v).collect();
        let r = 0.5 * c.iter().map(|v| v * v).sum::<f64>();
        Expression::quadratic(DMatrix::identity(d, d), q, r).unwrap()
    }

    #[test]
    fn single_agent_contraction() {
        let t = InProcNetwork::new(1).pop().unwrap();
        let data = CostCoupledLocal::new(half_sq_dist(&[0.0, 0.0]), vec![]).unwrap();
        let mut a = Agent::new(0, BTreeSet::new(), BTreeSet::new(), [(0, 1.0)].into(), None, Box::new(t), 0)
            .unwrap()
            .set_problem(LocalData::CostCoupled(data))
            .unwrap();
        let mut alg = Subgradient::with_initial(vec![2.0, 2.0]);
        let h = run(&mut alg, &mut a, 1, StepSize::Constant(0.5)).unwrap();
        assert_eq!(h.records[1].iterate, vec![1.0, 1.0]);
        let h = run(&mut Subgradient::new(), &mut a, 100, StepSize::Constant(0.5)).unwrap();
        assert_eq!(h.len(), 101);
        let h = run(&mut Subgradient::new(), &mut a, 0, StepSize::Constant(0.5)).unwrap();
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn zero_cost_reaches_initial_average() {
        let g = Graph::undirected(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let starts = [vec![4.0], vec![-1.0], vec![0.5], vec![2.5]];
        let mean = starts.iter().map(|v| v[0]).sum::<f64>() / 4.0;
        let data = (0..4).map(|_| LocalData::CostCoupled(CostCoupledLocal::new(Expression::linear(&[0.0], 0.0), vec![]).unwrap())).collect();
        let res = simulate(&g, data, |i| Subgradient::with_initial(starts[i].clone()), 400, StepSize::Constant(0.1));
        let hs: Vec<_> = res.into_iter().map(Result::unwrap).collect();
        for t in 0..=400 {
            let m: f64 = hs.iter().map(|h| h.records[t].iterate[0]).sum::<f64>() / 4.0;
            assert!((m - mean).abs() < 1e-12);
        }
        for h in &hs {
            assert!((h.last().unwrap().iterate[0] - mean).abs() < 1e-8);
        }
    }

    #[test]
    fn three_quadratics_reach_the_mean() {
        let c = [0.0, 3.0, 6.0];
        let data = c.iter().map(|&ci| LocalData::CostCoupled(CostCoupledLocal::new(half_sq_dist(&[ci]), vec![]).unwrap())).collect();
        let res = simulate(&complete(3), data, |_| Subgradient::new(), 50_000, StepSize::Diminishing(0.6));
        for h in res {
            assert!((h.unwrap().last().unwrap().iterate[0] - 3.0).abs() < 1e-2);
        }
    }

    #[test]
    fn respects_the_constraint_set() {
        let c = [0.0, 3.0, 6.0];
        let x = Constraint::box_bounds(&[-1.0], &[2.0]);
        let data = c.iter().map(|&ci| LocalData::CostCoupled(CostCoupledLocal::new(half_sq_dist(&[ci]), x.clone()).unwrap())).collect();
        let res = simulate(&complete(3), data, |_| Subgradient::new(), 50_000, StepSize::Diminishing(0.6));
        for h in res {
            let h = h.unwrap();
            assert!(h.records.iter().all(|r| r.iterate[0] <= 2.0 && r.iterate[0] >= -1.0));
            assert!((h.last().unwrap().iterate[0] - 2.0).abs() < 1e-2);
        }
    }

    #[test]
    fn wrong_setup_is_rejected() {
        let t = InProcNetwork::new(1).pop().unwrap();
        let g = Expression::affine(DMatrix::identity(1, 1), vec![0.0]).unwrap();
        let cc = crate::problem::ConstraintCoupledLocal::new(Expression::linear(&[1.0], 0.0), vec![], g).unwrap();
        let mut a = Agent::new(0, BTreeSet::new(), BTreeSet::new(), [(0, 1.0)].into(), None, Box::new(t), 0)
            .unwrap()
            .set_problem(LocalData::ConstraintCoupled(cc))
            .unwrap();
        assert!(matches!(run(&mut Subgradient::new(), &mut a, 1, StepSize::Constant(0.1)), Err(AlgorithmError::Setup(_))));
    }
}
