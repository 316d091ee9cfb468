use super::subgradient::cost_coupled;
use super::{mix, vectors, Algorithm, AlgorithmError, Record};
use crate::agent::Agent;
use crate::comms::Tensor;

/// Gradient tracking:
/// `x⁺ = Σ_j a_ij x_j − α s`, `s⁺ = Σ_j a_ij s_j + ∇f_i(x⁺) − ∇f_i(x)`,
/// `s⁰ = ∇f_i(x⁰)`. Unconstrained; the tracker is logged as auxiliary data.
#[derive(Debug, Clone, Default)]
pub struct GradientTracking {
    x0: Option<Vec<f64>>,
    x: Vec<f64>,
    s: Vec<f64>,
    grad: Vec<f64>,
}

impl GradientTracking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_initial(x0: Vec<f64>) -> Self {
        Self { x0: Some(x0), ..Self::default() }
    }
}

impl Algorithm for GradientTracking {
    fn name(&self) -> &'static str {
        "gradient_tracking"
    }

    fn init(&mut self, agent: &mut Agent) -> Result<Record, AlgorithmError> {
        let local = cost_coupled(agent)?;
        if !local.x_set.is_empty() {
            return Err(AlgorithmError::Setup("gradient tracking is unconstrained; X must be empty".into()));
        }
        let d = local.dim();
        self.x = self.x0.clone().unwrap_or_else(|| vec![0.0; d]);
        if self.x.len() != d {
            return Err(AlgorithmError::Setup(format!("initial point has length {}, expected {d}", self.x.len())));
        }
        self.grad = local.f.subgradient(&self.x)?;
        self.s = self.grad.clone();
        Ok(Record { round: 0, agent_id: agent.id(), local_cost: local.f.value(&self.x)?, iterate: self.x.clone(), aux: self.s.clone() })
    }

    fn iterate(&mut self, agent: &mut Agent, t: u64, alpha: f64) -> Result<Record, AlgorithmError> {
        let d = self.x.len();
        let received = agent.neighbors_exchange(&[Tensor::vector(self.x.clone()), Tensor::vector(self.s.clone())])?;
        let [xs, ss]: [_; 2] = vectors(received, 2, d)?.try_into().expect("two slots");
        let mx = mix(agent, &self.x, &xs);
        let ms = mix(agent, &self.s, &ss);
        let local = cost_coupled(agent)?;
        let x_new: Vec<f64> = mx.iter().zip(&self.s).map(|(m, s)| m - alpha * s).collect();
        let g_new = local.f.subgradient(&x_new)?;
        self.s = (0..d).map(|k| ms[k] + g_new[k] - self.grad[k]).collect();
        self.x = x_new;
        self.grad = g_new;
        Ok(Record { round: t, agent_id: agent.id(), local_cost: local.f.value(&self.x)?, iterate: self.x.clone(), aux: self.s.clone() })
    }
}
