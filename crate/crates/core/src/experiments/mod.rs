//! The three benchmark experiments: instance generators, centralized
//! oracles, error metrics, the instance file format and run drivers.

pub mod data;
mod driver;
mod instance;
mod metrics;
pub mod oracle;

pub use data::{
    gen_classification, gen_microgrid, gen_svm, local_logistic_objective, local_microgrid_problem, svm_constraints,
    svm_objective, svm_violation, ClassificationData, MicrogridData, MicrogridParams,
};
pub use driver::{make_algorithm, run_agent, run_inproc, RunSpec};
pub use instance::{decode_instance, encode_instance, instance_hash};
pub use metrics::{compute_metrics, MetricRow, Metrics, FEASIBILITY_TOL};
pub use oracle::{centralized_oracle, Oracle};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::agent::AgentError;
use crate::algorithms::{AlgorithmError, AlgorithmKind, SetUp};
use crate::comms::CommsError;
use crate::functions::FunctionError;
use crate::graph::GraphError;
use crate::problem::{CommonCostLocal, CostCoupledLocal, LocalData, ProblemError};
use crate::solvers::Status;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("generator: {0}")]
    Generator(String),
    #[error("experiment `{experiment}` needs a {expected:?} algorithm; `{algorithm}` is not one")]
    Mismatch { experiment: ExperimentKind, algorithm: AlgorithmKind, expected: SetUp },
    #[error("centralized solve ended with status {0:?}")]
    Oracle(Status),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("instance file: {0}")]
    Format(String),
    #[error("metrics line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("agent {id}: {source}")]
    Agent { id: usize, source: AlgorithmError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Comms(#[from] CommsError),
}

impl From<FunctionError> for ExperimentError {
    fn from(e: FunctionError) -> Self {
        ExperimentError::Problem(ProblemError::Function(e))
    }
}

impl ExperimentError {
    /// True when the failure is a neighbor that never answered.
    pub fn is_timeout(&self) -> bool {
        match self {
            ExperimentError::Comms(CommsError::Timeout { .. }) => true,
            ExperimentError::Agent { source: AlgorithmError::Agent(AgentError::Comms(CommsError::Timeout { .. })), .. } => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Logistic,
    Svm,
    Microgrid,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [ExperimentKind::Logistic, ExperimentKind::Svm, ExperimentKind::Microgrid];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Logistic => "logistic",
            ExperimentKind::Svm => "svm",
            ExperimentKind::Microgrid => "microgrid",
        }
    }

    pub fn setup(&self) -> SetUp {
        match self {
            ExperimentKind::Logistic => SetUp::CostCoupled,
            ExperimentKind::Svm => SetUp::CommonCost,
            ExperimentKind::Microgrid => SetUp::ConstraintCoupled,
        }
    }

    /// SVM runs on a directed graph; the others need symmetric weights.
    pub fn default_undirected(&self) -> bool {
        !matches!(self, ExperimentKind::Svm)
    }

    pub fn check(&self, algorithm: AlgorithmKind) -> Result<(), ExperimentError> {
        if algorithm.setup() == self.setup() {
            Ok(())
        } else {
            Err(ExperimentError::Mismatch { experiment: *self, algorithm, expected: self.setup() })
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown experiment `{s}` (expected logistic, svm or microgrid)"))
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Generator settings for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub seed: u64,
    /// Logistic regularization weight.
    pub c: f64,
    /// Microgrid horizon `S`.
    pub horizon: usize,
    pub microgrid: MicrogridParams,
}

impl InstanceConfig {
    pub fn new(kind: ExperimentKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed, c: 10.0, horizon: 8, microgrid: MicrogridParams::default() }
    }
}

/// A generated (or loaded) experiment instance, one entry per agent.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Logistic { data: Vec<ClassificationData>, c: f64 },
    Svm { data: Vec<ClassificationData> },
    Microgrid { data: Vec<MicrogridData> },
}

impl Instance {
    pub fn generate(cfg: &InstanceConfig) -> Result<Self, ExperimentError> {
        if cfg.n == 0 {
            return Err(ExperimentError::Generator("N must be at least 1".into()));
        }
        Ok(match cfg.kind {
            ExperimentKind::Logistic => Instance::Logistic { data: gen_classification(cfg.n, cfg.seed)?, c: cfg.c },
            ExperimentKind::Svm => Instance::Svm { data: gen_svm(cfg.n, cfg.seed)? },
            ExperimentKind::Microgrid => Instance::Microgrid { data: gen_microgrid(cfg.n, cfg.horizon, cfg.seed, &cfg.microgrid)? },
        })
    }

    pub fn kind(&self) -> ExperimentKind {
        match self {
            Instance::Logistic { .. } => ExperimentKind::Logistic,
            Instance::Svm { .. } => ExperimentKind::Svm,
            Instance::Microgrid { .. } => ExperimentKind::Microgrid,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Instance::Logistic { data, .. } | Instance::Svm { data } => data.len(),
            Instance::Microgrid { data } => data.len(),
        }
    }

    /// Agent `i`'s local problem in the layout `algorithm` consumes.
    pub fn local_data(&self, i: usize, algorithm: AlgorithmKind) -> Result<LocalData, ExperimentError> {
        self.kind().check(algorithm)?;
        let n = self.n();
        Ok(match self {
            Instance::Logistic { data, c } => LocalData::CostCoupled(CostCoupledLocal::new(local_logistic_objective(&data[i], n, *c)?, vec![])?),
            Instance::Svm { data } => LocalData::CommonCost(CommonCostLocal::new(svm_objective(), svm_constraints(&data[i])?)?),
            Instance::Microgrid { data } => LocalData::ConstraintCoupled(local_microgrid_problem(&data[i])?),
        })
    }

    /// All points and labels pooled across agents.
    pub fn pooled_points(&self) -> (Vec<[f64; 2]>, Vec<f64>) {
        match self {
            Instance::Logistic { data, .. } | Instance::Svm { data } => {
                (data.iter().flat_map(|d| d.points.clone()).collect(), data.iter().flat_map(|d| d.labels.clone()).collect())
            }
            Instance::Microgrid { .. } => (Vec::new(), Vec::new()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_up_compatibility() {
        assert!(ExperimentKind::Svm.check(AlgorithmKind::Subgradient).is_err());
        assert!(ExperimentKind::Svm.check(AlgorithmKind::ConstraintsConsensus).is_ok());
        assert!(ExperimentKind::Logistic.check(AlgorithmKind::GradientTracking).is_ok());
        assert!(ExperimentKind::Microgrid.check(AlgorithmKind::GradientTracking).is_err());
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
    }

    #[test]
    fn local_data_layouts() {
        let inst = Instance::generate(&InstanceConfig::new(ExperimentKind::Microgrid, 3, 0)).unwrap();
        let l = inst.local_data(1, AlgorithmKind::DualSubgradient).unwrap();
        assert_eq!(l.dim(), 16);
        assert_eq!(l.coupling_dim(), Some(8));
        assert!(matches!(inst.local_data(1, AlgorithmKind::Subgradient), Err(ExperimentError::Mismatch { .. })));
    }
}
