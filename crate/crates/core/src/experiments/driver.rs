use std::thread;
use std::time::Duration;

use super::{ExperimentError, Instance};
use crate::agent::Agent;
use crate::algorithms::{
    run, Algorithm, AlgorithmKind, ConstraintsConsensus, DualSubgradient, GradientTracking, History, PrimalDecomposition,
    StepSize, Subgradient,
};
use crate::comms::{InProcNetwork, Transport};
use crate::graph::Graph;

/// Everything an agent needs besides its data and transport.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub algorithm: AlgorithmKind,
    pub iterations: usize,
    pub step: StepSize,
    pub seed: u64,
    /// Slack penalty `M` for primal decomposition.
    pub penalty: f64,
}

pub fn make_algorithm(kind: AlgorithmKind, penalty: f64) -> Box<dyn Algorithm> {
    match kind {
        AlgorithmKind::Subgradient => Box::new(Subgradient::new()),
        AlgorithmKind::GradientTracking => Box::new(GradientTracking::new()),
        AlgorithmKind::ConstraintsConsensus => Box::new(ConstraintsConsensus::new()),
        AlgorithmKind::DualSubgradient => Box::new(DualSubgradient::new()),
        AlgorithmKind::PrimalDecomposition => Box::new(PrimalDecomposition::with_penalty(penalty)),
    }
}

/// Runs agent `id` of `instance` over `transport`; used by every execution
/// mode so in-process and TCP runs take identical code paths.
pub fn run_agent(spec: &RunSpec, graph: &Graph, instance: &Instance, id: usize, transport: Box<dyn Transport>) -> Result<History, ExperimentError> {
    let local = instance.local_data(id, spec.algorithm)?;
    let wrap = |e| ExperimentError::Agent { id, source: e };
    let w = graph.consensus_weights();
    let agent = Agent::from_graph(graph, &w, id, transport, spec.seed).map_err(|e| wrap(e.into()))?;
    let mut agent = agent.set_problem(local).map_err(|e| wrap(e.into()))?;
    let mut alg = make_algorithm(spec.algorithm, spec.penalty);
    run(alg.as_mut(), &mut agent, spec.iterations, spec.step).map_err(wrap)
}

/// One thread per agent over an in-process network. When several agents
/// fail the root cause is reported in preference to neighbors timing out.
pub fn run_inproc(spec: &RunSpec, graph: &Graph, instance: &Instance, timeout: Duration) -> Result<Vec<History>, ExperimentError> {
    let n = instance.n();
    if graph.n() != n {
        return Err(ExperimentError::Generator(format!("graph has {} nodes, instance {n} agents", graph.n())));
    }
    instance.kind().check(spec.algorithm)?;
    let results: Vec<Result<History, ExperimentError>> = thread::scope(|s| {
        let handles: Vec<_> = InProcNetwork::with_timeout(n, timeout)
            .into_iter()
            .enumerate()
            .map(|(i, t)| s.spawn(move || run_agent(spec, graph, instance, i, Box::new(t))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("agent thread panicked")).collect()
    });
    let mut errors: Vec<ExperimentError> = results.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
    if !errors.is_empty() {
        errors.sort_by_key(|e| e.is_timeout());
        return Err(errors.swap_remove(0));
    }
    Ok(results.into_iter().map(Result::unwrap).collect())
}
