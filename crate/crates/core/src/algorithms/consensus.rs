use std::cmp::Ordering;

use sha2::{Digest, Sha256};

use super::{Algorithm, AlgorithmError, Record};
use crate::agent::Agent;
use crate::comms::Tensor;
use crate::functions::{Constraint, Expression};
use crate::problem::{solve, CommonCostLocal, LocalData, Problem};
use crate::solvers::{Solution, SolverOptions};

/// Constraints consensus: each round an agent solves the common problem over
/// its own constraints, its basis and its in-neighbors' bases, then keeps a
/// minimal subset (the new basis) with the same tie-broken optimizer.
#[derive(Debug, Clone)]
pub struct ConstraintsConsensus {
    basis: Vec<Constraint>,
    x: Vec<f64>,
    tol: f64,
}

impl Default for ConstraintsConsensus {
    fn default() -> Self {
        Self { basis: Vec::new(), x: Vec::new(), tol: 1e-9 }
    }
}

impl ConstraintsConsensus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn basis(&self) -> &[Constraint] {
        &self.basis
    }

    fn record(&self, agent: &Agent, f: &Expression, round: u64) -> Result<Record, AlgorithmError> {
        Ok(Record {
            round,
            agent_id: agent.id(),
            local_cost: f.value(&self.x)?,
            iterate: self.x.clone(),
            aux: vec![self.basis.len() as f64, basis_tag(&self.basis)],
        })
    }

    fn update(&mut self, f: &Expression, mut cands: Vec<Constraint>, round: u64) -> Result<(), AlgorithmError> {
        cands.sort_by(|a, b| a.canonical_cmp(b));
        cands.dedup_by(|a, b| a.canonical_cmp(b) == Ordering::Equal);
        let s = lex_solve(f, &cands, round)?;
        self.basis = extract_basis(f, cands, &s.x, self.tol)?;
        self.x = s.x;
        Ok(())
    }
}

fn common_cost(agent: &Agent) -> Result<&CommonCostLocal, AlgorithmError> {
    match agent.local_data()? {
        LocalData::CommonCost(l) => Ok(l),
        other => Err(AlgorithmError::Setup(format!("expected common-cost data, agent {} has {}", agent.id(), other.kind_name()))),
    }
}

fn lex_solve(f: &Expression, cons: &[Constraint], round: u64) -> Result<Solution, AlgorithmError> {
    let s = solve(&Problem::new(f.clone(), cons.to_vec())?, &SolverOptions::lexicographic())?;
    if !s.is_optimal() {
        return Err(AlgorithmError::LocalSolve { round, status: s.status });
    }
    Ok(s)
}

/// Drops slack constraints outright (the tie-broken optimizer of a convex
/// problem only depends on constraints active there), then greedily removes
/// active ones whose removal leaves the optimizer unchanged within `tol`.
fn extract_basis(f: &Expression, cands: Vec<Constraint>, x: &[f64], tol: f64) -> Result<Vec<Constraint>, AlgorithmError> {
    // activity is judged more loosely than optimizer equality so solver
    // round-off never drops a binding row
    let mut basis: Vec<Constraint> = cands.into_iter().filter(|c| c.violation(x).map(|v| v >= -1e-7).unwrap_or(true)).collect();
    let mut k = 0;
    while k < basis.len() {
        let mut trial = basis.clone();
        trial.remove(k);
        let same = match solve(&Problem::new(f.clone(), trial.clone())?, &SolverOptions::lexicographic()) {
            Ok(s) if s.is_optimal() => s.x.iter().zip(x).all(|(a, b)| (a - b).abs() <= tol),
            _ => false,
        };
        if same {
            basis = trial;
        } else {
            k += 1;
        }
    }
    Ok(basis)
}

/// 48-bit digest of a basis, exact in an `f64`, for agreement checks.
pub fn basis_tag(basis: &[Constraint]) -> f64 {
    let mut sorted: Vec<&Constraint> = basis.iter().collect();
    sorted.sort_by(|a, b| a.canonical_cmp(b));
    let mut h = Sha256::new();
    for c in sorted {
        match c.affine_row() {
            Some((a, b)) => {
                h.update([c.is_equality() as u8]);
                for v in a.iter().chain([&b]) {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
            None => h.update([2u8]),
        }
    }
    let d = h.finalize();
    let mut v = 0u64;
    for byte in &d[..6] {
        v = (v << 8) | *byte as u64;
    }
    v as f64
}

fn encode(basis: &[Constraint], d: usize) -> Tensor {
    let mut data = Vec::with_capacity(basis.len() * (d + 2));
    for c in basis {
        let (a, b) = c.affine_row().expect("bases hold affine rows");
        data.extend_from_slice(a);
        data.push(b);
        data.push(if c.is_equality() { 1.0 } else { 0.0 });
    }
    Tensor::matrix(basis.len(), d + 2, data).expect("row width")
}

fn decode(t: &Tensor, d: usize, from: usize) -> Result<Vec<Constraint>, AlgorithmError> {
    if t.shape().len() != 2 || t.shape()[1] != d + 2 {
        return Err(AlgorithmError::Payload { from, msg: format!("basis must be a k × {} matrix", d + 2) });
    }
    Ok(t.data()
        .chunks(d + 2)
        .map(|row| {
            let a = row[..d].to_vec();
            if row[d + 1] != 0.0 {
                Constraint::eq(a, row[d])
            } else {
                Constraint::le(a, row[d])
            }
        })
        .collect())
}

impl Algorithm for ConstraintsConsensus {
    fn name(&self) -> &'static str {
        "constraints_consensus"
    }

    fn init(&mut self, agent: &mut Agent) -> Result<Record, AlgorithmError> {
        let local = common_cost(agent)?.clone();
        if local.x_i.iter().any(|c| !c.is_affine()) {
            return Err(AlgorithmError::Setup("constraints consensus needs affine constraints".into()));
        }
        self.update(&local.f, local.x_i.clone(), 0)?;
        self.record(agent, &local.f, 0)
    }

    fn iterate(&mut self, agent: &mut Agent, t: u64, _alpha: f64) -> Result<Record, AlgorithmError> {
        let local = common_cost(agent)?.clone();
        let d = local.dim();
        let received = agent.neighbors_exchange(&[encode(&self.basis, d)])?;
        let mut cands = local.x_i.clone();
        cands.extend(self.basis.iter().cloned());
        for (j, p) in received {
            let [t] = p.as_slice() else {
                return Err(AlgorithmError::Payload { from: j, msg: "expected one tensor".into() });
            };
            cands.extend(decode(t, d, j)?);
        }
        self.update(&local.f, cands, t)?;
        self.record(agent, &local.f, t)
    }
}
