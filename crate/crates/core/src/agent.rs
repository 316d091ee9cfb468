//! Execution context an algorithm runs against: identity, neighborhood,
//! weights, local problem data, transport and a private random stream.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::comms::{self, CommsError, Tensor, Transport, KIND_DATA};
use crate::graph::{Graph, WeightMatrix, STOCHASTIC_TOL};
use crate::problem::LocalData;
use crate::rng::agent_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("weight keys {got:?} differ from {{id}} ∪ in-neighbors {expected:?}")]
    WeightKeys { expected: Vec<usize>, got: Vec<usize> },
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("agent {id} listed among its own neighbors")]
    SelfNeighbor { id: usize },
    #[error("transport belongs to agent {transport}, not {id}")]
    TransportId { id: usize, transport: usize },
    #[error("local data has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("local data has {got} coupling rows, expected {expected}")]
    CouplingDimension { expected: usize, got: usize },
    #[error("agent has no local data")]
    NoData,
    #[error(transparent)]
    Comms(#[from] CommsError),
}

pub struct Agent {
    id: usize,
    in_nbrs: BTreeSet<usize>,
    out_nbrs: BTreeSet<usize>,
    weights: BTreeMap<usize, f64>,
    local: Option<LocalData>,
    expected_dim: Option<usize>,
    expected_coupling: Option<usize>,
    transport: Box<dyn Transport>,
    round: u64,
    barrier_round: u64,
    rng: ChaCha8Rng,
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent")
            .field("id", &self.id)
            .field("in_nbrs", &self.in_nbrs)
            .field("out_nbrs", &self.out_nbrs)
            .field("weights", &self.weights)
            .field("round", &self.round)
            .finish_non_exhaustive()
    }
}

impl Agent {
    pub fn new(
        id: usize,
        in_nbrs: BTreeSet<usize>,
        out_nbrs: BTreeSet<usize>,
        weights: BTreeMap<usize, f64>,
        local: Option<LocalData>,
        transport: Box<dyn Transport>,
        global_seed: u64,
    ) -> Result<Self, AgentError> {
        if in_nbrs.contains(&id) || out_nbrs.contains(&id) {
            return Err(AgentError::SelfNeighbor { id });
        }
        if transport.id() != id {
            return Err(AgentError::TransportId { id, transport: transport.id() });
        }
        let mut expected: Vec<usize> = in_nbrs.iter().copied().chain([id]).collect();
        expected.sort_unstable();
        let got: Vec<usize> = weights.keys().copied().collect();
        if got != expected {
            return Err(AgentError::WeightKeys { expected, got });
        }
        let sum: f64 = weights.values().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL || weights.values().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(AgentError::WeightSum(sum));
        }
        Ok(Self {
            id,
            in_nbrs,
            out_nbrs,
            weights,
            local,
            expected_dim: None,
            expected_coupling: None,
            transport,
            round: 0,
            barrier_round: 0,
            rng: agent_rng(global_seed, id),
        })
    }

    /// Agent `id` of `graph`, with its row of `w` as weights.
    pub fn from_graph(
        graph: &Graph,
        w: &WeightMatrix,
        id: usize,
        transport: Box<dyn Transport>,
        global_seed: u64,
    ) -> Result<Self, AgentError> {
        let ins = graph.in_neighbors(id).clone();
        let weights = ins.iter().copied().chain([id]).map(|j| (j, w.get(id, j))).collect();
        Self::new(id, ins, graph.out_neighbors(id).clone(), weights, None, transport, global_seed)
    }

    /// Requires every later `set_problem` to match dimension `d` (and `S`
    /// coupling rows when given).
    pub fn expect_dimensions(mut self, d: usize, coupling: Option<usize>) -> Self {
        self.expected_dim = Some(d);
        self.expected_coupling = coupling;
        self
    }

    pub fn set_problem(mut self, data: LocalData) -> Result<Self, AgentError> {
        let expected = self.expected_dim.or_else(|| self.local.as_ref().map(LocalData::dim));
        if let Some(expected) = expected {
            if data.dim() != expected {
                return Err(AgentError::Dimension { expected, got: data.dim() });
            }
        }
        if let (Some(expected), Some(got)) = (self.expected_coupling, data.coupling_dim()) {
            if got != expected {
                return Err(AgentError::CouplingDimension { expected, got });
            }
        }
        self.expected_dim = Some(data.dim());
        self.local = Some(data);
        Ok(self)
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn n(&self) -> usize {
        self.transport.n()
    }

    pub fn in_neighbors(&self) -> &BTreeSet<usize> {
        &self.in_nbrs
    }

    pub fn out_neighbors(&self) -> &BTreeSet<usize> {
        &self.out_nbrs
    }

    /// Weight `a_ij` for `j ∈ {id} ∪ in-neighbors`, zero otherwise.
    pub fn weight(&self, j: usize) -> f64 {
        self.weights.get(&j).copied().unwrap_or(0.0)
    }

    pub fn weights(&self) -> &BTreeMap<usize, f64> {
        &self.weights
    }

    pub fn local_data(&self) -> Result<&LocalData, AgentError> {
        self.local.as_ref().ok_or(AgentError::NoData)
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn transport(&mut self) -> &mut dyn Transport {
        self.transport.as_mut()
    }

    /// Sends `payload` to all out-neighbors and returns one payload per
    /// in-neighbor; the round counter advances by one.
    pub fn neighbors_exchange(&mut self, payload: &[Tensor]) -> Result<BTreeMap<usize, Vec<Tensor>>, AgentError> {
        let r = self.round;
        self.round += 1;
        Ok(comms::neighbors_exchange(self.transport.as_mut(), &self.in_nbrs, &self.out_nbrs, KIND_DATA, payload, r)?)
    }

    pub fn neighbors_exchange_keyed(
        &mut self,
        payloads: &BTreeMap<usize, Vec<Tensor>>,
    ) -> Result<BTreeMap<usize, Vec<Tensor>>, AgentError> {
        let r = self.round;
        let res = comms::neighbors_exchange_keyed(self.transport.as_mut(), &self.in_nbrs, &self.out_nbrs, KIND_DATA, payloads, r)?;
        self.round += 1;
        Ok(res)
    }

    pub fn barrier(&mut self) -> Result<(), AgentError> {
        let r = self.barrier_round;
        self.barrier_round += 1;
        Ok(self.transport.barrier(r)?)
    }
}
