//! The synchronous distributed algorithms. Each is a per-agent state machine
//! driven by [`run`]: `init` produces round 0, every `iterate` one more
//! round, with a barrier after each.

mod consensus;
mod dual;
mod primal;
mod subgradient;
mod tracking;

pub use consensus::ConstraintsConsensus;
pub use dual::DualSubgradient;
pub use primal::PrimalDecomposition;
pub use subgradient::Subgradient;
pub use tracking::GradientTracking;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::agent::{Agent, AgentError};
use crate::comms::{CommsError, Message, Tensor};
use crate::problem::ProblemError;
use crate::solvers::Status;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgorithmError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("local solve at round {round} ended with status {status:?}")]
    LocalSolve { round: u64, status: Status },
    #[error("{0}")]
    Setup(String),
    #[error("malformed payload from agent {from}: {msg}")]
    Payload { from: usize, msg: String },
}

impl From<crate::functions::FunctionError> for AlgorithmError {
    fn from(e: crate::functions::FunctionError) -> Self {
        AlgorithmError::Problem(ProblemError::Function(e))
    }
}

impl From<CommsError> for AlgorithmError {
    fn from(e: CommsError) -> Self {
        AlgorithmError::Agent(AgentError::Comms(e))
    }
}

/// `α^t`: constant, or `(1/t)^p` with `t ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    Diminishing(f64),
}

impl StepSize {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            StepSize::Constant(a) => a,
            StepSize::Diminishing(p) => (1.0 / t.max(1) as f64).powf(p),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            StepSize::Constant(a) if a > 0.0 && a.is_finite() => Ok(()),
            StepSize::Constant(a) => Err(format!("constant step must be positive, got {a}")),
            StepSize::Diminishing(p) if p > 0.5 && p <= 1.0 => Ok(()),
            StepSize::Diminishing(p) => Err(format!("diminishing exponent must lie in (0.5, 1], got {p}")),
        }
    }
}

impl FromStr for StepSize {
    type Err = String;

    /// `constant:α` or `diminishing:p`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (rule, v) = s.split_once(':').ok_or_else(|| format!("step `{s}`: expected rule:value"))?;
        let v: f64 = v.parse().map_err(|_| format!("step `{s}`: bad number"))?;
        let step = match rule {
            "constant" => StepSize::Constant(v),
            "diminishing" => StepSize::Diminishing(v),
            _ => return Err(format!("step `{s}`: unknown rule `{rule}`")),
        };
        step.validate()?;
        Ok(step)
    }
}

impl fmt::Display for StepSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSize::Constant(a) => write!(f, "constant:{a}"),
            StepSize::Diminishing(p) => write!(f, "diminishing:{p}"),
        }
    }
}

/// One agent's state after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub round: u64,
    pub agent_id: usize,
    pub local_cost: f64,
    pub iterate: Vec<f64>,
    pub aux: Vec<f64>,
}

/// Records of one agent, round 0 first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub records: Vec<Record>,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// CSV with a header; iterate columns `x0..`, auxiliary columns `aux0..`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let (d, k) = self.records.first().map(|r| (r.iterate.len(), r.aux.len())).unwrap_or((0, 0));
        out.push_str("round,agent_id,local_cost");
        for j in 0..d {
            out.push_str(&format!(",x{j}"));
        }
        for j in 0..k {
            out.push_str(&format!(",aux{j}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{:?}", r.round, r.agent_id, r.local_cost));
            for v in r.iterate.iter().chain(&r.aux) {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`History::to_csv`]; values round-trip bit for bit.
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or("line 1: empty history")?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[..3] != ["round", "agent_id", "local_cost"] {
            return Err("line 1: bad history header".into());
        }
        let d = cols.iter().filter(|c| c.starts_with('x')).count();
        if cols.len() != 3 + d + cols.iter().filter(|c| c.starts_with("aux")).count() {
            return Err("line 1: unknown column".into());
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| format!("line {}: {what}", i + 1);
            if f.len() != cols.len() {
                return Err(bad("wrong field count"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let vals = f[3..].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
            records.push(Record {
                round: f[0].parse().map_err(|_| bad("bad round"))?,
                agent_id: f[1].parse().map_err(|_| bad("bad agent id"))?,
                local_cost: num(f[2])?,
                iterate: vals[..d].to_vec(),
                aux: vals[d..].to_vec(),
            });
        }
        Ok(Self { records })
    }

    /// Packs the history into one message: a matrix whose rows are
    /// `[round, agent_id, local_cost, iterate.., aux..]`.
    pub fn to_message(&self, sender: usize, kind: u8) -> Message {
        let (d, k) = self.records.first().map(|r| (r.iterate.len(), r.aux.len())).unwrap_or((0, 0));
        let cols = 3 + d + k;
        let mut data = Vec::with_capacity(self.records.len() * cols);
        for r in &self.records {
            data.extend([r.round as f64, r.agent_id as f64, r.local_cost]);
            data.extend(&r.iterate);
            data.extend(&r.aux);
        }
        let shape = vec![Tensor::vector(vec![d as f64, k as f64])];
        let table = Tensor::matrix(self.records.len(), cols, data).expect("consistent record widths");
        Message::new(sender, 0, kind, [shape, vec![table]].concat())
    }

    pub fn from_message(m: &Message) -> Result<Self, AlgorithmError> {
        let bad = |msg: &str| AlgorithmError::Payload { from: m.sender as usize, msg: msg.into() };
        let [dims, table] = m.payload.as_slice() else { return Err(bad("expected two tensors")) };
        let (d, k) = match dims.data() {
            [d, k] => (*d as usize, *k as usize),
            _ => return Err(bad("bad width header")),
        };
        let cols = 3 + d + k;
        if table.shape().len() != 2 || table.shape()[1] != cols {
            return Err(bad("table width disagrees with header"));
        }
        let records = table
            .data()
            .chunks(cols)
            .map(|row| Record {
                round: row[0] as u64,
                agent_id: row[1] as usize,
                local_cost: row[2],
                iterate: row[3..3 + d].to_vec(),
                aux: row[3 + d..].to_vec(),
            })
            .collect();
        Ok(Self { records })
    }
}

/// A synchronous per-agent algorithm.
pub trait Algorithm: Send {
    fn name(&self) -> &'static str;
    /// Initial state (round 0).
    fn init(&mut self, agent: &mut Agent) -> Result<Record, AlgorithmError>;
    /// One round with step `alpha`.
    fn iterate(&mut self, agent: &mut Agent, t: u64, alpha: f64) -> Result<Record, AlgorithmError>;
}

/// Runs `iterations` rounds; the history has `iterations + 1` records.
pub fn run(alg: &mut dyn Algorithm, agent: &mut Agent, iterations: usize, step: StepSize) -> Result<History, AlgorithmError> {
    step.validate().map_err(AlgorithmError::Setup)?;
    let mut records = Vec::with_capacity(iterations + 1);
    records.push(alg.init(agent)?);
    agent.barrier()?;
    for t in 1..=iterations as u64 {
        records.push(alg.iterate(agent, t, step.at(t))?);
        agent.barrier()?;
    }
    Ok(History { records })
}

/// Algorithm names as used on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Subgradient,
    GradientTracking,
    ConstraintsConsensus,
    DualSubgradient,
    PrimalDecomposition,
}

/// Which local data layout an algorithm consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetUp {
    CostCoupled,
    CommonCost,
    ConstraintCoupled,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 5] = [
        AlgorithmKind::Subgradient,
        AlgorithmKind::GradientTracking,
        AlgorithmKind::ConstraintsConsensus,
        AlgorithmKind::DualSubgradient,
        AlgorithmKind::PrimalDecomposition,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Subgradient => "subgradient",
            AlgorithmKind::GradientTracking => "gradient_tracking",
            AlgorithmKind::ConstraintsConsensus => "constraints_consensus",
            AlgorithmKind::DualSubgradient => "dual_subgradient",
            AlgorithmKind::PrimalDecomposition => "primal_decomposition",
        }
    }

    pub fn setup(&self) -> SetUp {
        match self {
            AlgorithmKind::Subgradient | AlgorithmKind::GradientTracking => SetUp::CostCoupled,
            AlgorithmKind::ConstraintsConsensus => SetUp::CommonCost,
            AlgorithmKind::DualSubgradient | AlgorithmKind::PrimalDecomposition => SetUp::ConstraintCoupled,
        }
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            format!("unknown algorithm `{s}` (expected one of {})", names.join(", "))
        })
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `Σ_j a_ij v_j` over `{i} ∪ in-neighbors` in increasing id order, so the
/// floating-point result does not depend on arrival order.
pub(crate) fn mix(agent: &Agent, own: &[f64], received: &std::collections::BTreeMap<usize, Vec<f64>>) -> Vec<f64> {
    let mut acc = vec![0.0; own.len()];
    for (&j, &w) in agent.weights() {
        let v = if j == agent.id() { own } else { &received[&j] };
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    acc
}

/// Checks that every received payload has `count` tensors of length `len`
/// and flattens them.
pub(crate) fn vectors(
    received: std::collections::BTreeMap<usize, Vec<Tensor>>,
    count: usize,
    len: usize,
) -> Result<Vec<std::collections::BTreeMap<usize, Vec<f64>>>, AlgorithmError> {
    let mut out = vec![std::collections::BTreeMap::new(); count];
    for (j, p) in received {
        if p.len() != count || p.iter().any(|t| t.data().len() != len) {
            return Err(AlgorithmError::Payload { from: j, msg: format!("expected {count} vectors of length {len}") });
        }
        for (slot, t) in out.iter_mut().zip(p) {
            slot.insert(j, t.into_data());
        }
    }
    Ok(out)
}
