//! Error series against the centralized oracle, and their CSV form
//! `round,agent,metric,value` (agent `all` for network-wide rows).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::data::{local_logistic_objective, local_microgrid_problem, svm_violation};
use super::{ExperimentError, Instance, Oracle};
use crate::algorithms::{AlgorithmKind, History};

/// Coupling values at or below this count as feasible in reports.
pub const FEASIBILITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub round: u64,
    /// `None` for network-wide values.
    pub agent: Option<usize>,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub rows: Vec<MetricRow>,
}

fn norm_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn rel(v: f64, f_star: f64) -> f64 {
    (v - f_star).abs() / f_star.abs().max(f64::MIN_POSITIVE)
}

/// Per-round metrics of a finished run.
///
/// * `cost_error`: `|Σ_i f_i(x̄) − f*| / |f*|` with `x̄` the mean estimate
///   (logistic), `max_i |f(x_i) − f*| / |f*|` (SVM), or
///   `|Σ_i f_i(x_i) − f*| / |f*|` (microgrid).
/// * `solution_error`: `max_i ‖x_i − x*‖` where all agents estimate `x*`.
/// * `coupling`: `max_k Σ_i g_i(x_i)_k`; feasible when `≤ 0`.
/// * `agreement`: 1 when every basis digest matches.
/// * `phi`: per-agent worst margin violation over all points.
/// * `max_dual`, `allocation_drift`: dual size and `max_k |Σ_i y_i^t − Σ_i y_i⁰|`.
pub fn compute_metrics(instance: &Instance, oracle: &Oracle, algorithm: AlgorithmKind, histories: &[History]) -> Result<Metrics, ExperimentError> {
    instance.kind().check(algorithm)?;
    let n = histories.len();
    if n != instance.n() {
        return Err(ExperimentError::Generator(format!("{n} histories for {} agents", instance.n())));
    }
    let rounds = histories.first().map(History::len).unwrap_or(0);
    if histories.iter().any(|h| h.len() != rounds) {
        return Err(ExperimentError::Generator("histories differ in length".into()));
    }
    let mut rows = Vec::new();
    let mut push = |round: u64, agent: Option<usize>, metric: &str, value: f64| rows.push(MetricRow { round, agent, metric: metric.to_string(), value });
    match instance {
        Instance::Logistic { data, c } => {
            let fs = data.iter().map(|d| local_logistic_objective(d, n, *c)).collect::<Result<Vec<_>, _>>()?;
            for t in 0..rounds {
                let xs: Vec<&[f64]> = histories.iter().map(|h| h.records[t].iterate.as_slice()).collect();
                let d = xs[0].len();
                let mean: Vec<f64> = (0..d).map(|k| xs.iter().map(|x| x[k]).sum::<f64>() / n as f64).collect();
                let mut total = 0.0;
                for f in &fs {
                    total += f.value(&mean)?;
                }
                let r = t as u64;
                push(r, None, "cost_error", rel(total, oracle.f));
                push(r, None, "solution_error", xs.iter().map(|x| norm_dist(x, &oracle.x)).fold(0.0, f64::max));
                for (i, h) in histories.iter().enumerate() {
                    push(r, Some(i), "local_cost", h.records[t].local_cost);
                }
            }
        }
        Instance::Svm { .. } => {
            let (pts, labels) = instance.pooled_points();
            for t in 0..rounds {
                let recs: Vec<_> = histories.iter().map(|h| &h.records[t]).collect();
                let r = t as u64;
                push(r, None, "cost_error", recs.iter().map(|x| rel(x.local_cost, oracle.f)).fold(0.0, f64::max));
                push(r, None, "solution_error", recs.iter().map(|x| norm_dist(&x.iterate, &oracle.x)).fold(0.0, f64::max));
                if algorithm == AlgorithmKind::ConstraintsConsensus {
                    let tags: BTreeSet<u64> = recs.iter().map(|x| x.aux[1].to_bits()).collect();
                    push(r, None, "agreement", if tags.len() == 1 { 1.0 } else { 0.0 });
                }
                for (i, x) in recs.iter().enumerate() {
                    push(r, Some(i), "local_cost", x.local_cost);
                    push(r, Some(i), "phi", svm_violation(&pts, &labels, &x.iterate[..2], x.iterate[2]));
                }
            }
        }
        Instance::Microgrid { data } => {
            let locals = data.iter().map(local_microgrid_problem).collect::<Result<Vec<_>, _>>()?;
            let s = locals.first().map(|l| l.coupling_dim()).unwrap_or(0);
            let d = locals.first().map(|l| l.dim()).unwrap_or(0);
            let y0: Vec<f64> = (0..s).map(|k| histories.iter().map(|h| h.records[0].aux[k]).sum()).collect();
            for t in 0..rounds {
                let recs: Vec<_> = histories.iter().map(|h| &h.records[t]).collect();
                let r = t as u64;
                let total: f64 = recs.iter().map(|x| x.local_cost).sum();
                let mut coupling = vec![0.0; s];
                for (l, x) in locals.iter().zip(&recs) {
                    for (acc, g) in coupling.iter_mut().zip(l.g.eval(&x.iterate)?) {
                        *acc += g;
                    }
                }
                push(r, None, "cost_error", rel(total, oracle.f));
                push(r, None, "coupling", coupling.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                match algorithm {
                    AlgorithmKind::DualSubgradient => {
                        let m = recs.iter().flat_map(|x| x.aux[d..d + s].iter().copied()).fold(0.0, f64::max);
                        push(r, None, "max_dual", m);
                    }
                    AlgorithmKind::PrimalDecomposition => {
                        let drift = (0..s)
                            .map(|k| (recs.iter().map(|x| x.aux[k]).sum::<f64>() - y0[k]).abs())
                            .fold(0.0, f64::max);
                        push(r, None, "allocation_drift", drift);
                    }
                    _ => {}
                }
                for (i, x) in recs.iter().enumerate() {
                    push(r, Some(i), "local_cost", x.local_cost);
                }
            }
        }
    }
    Ok(Metrics { rows })
}

impl Metrics {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,agent,metric,value\n");
        for r in &self.rows {
            let agent = r.agent.map(|a| a.to_string()).unwrap_or_else(|| "all".into());
            writeln!(out, "{},{},{},{:?}", r.round, agent, r.metric, r.value).expect("write to string");
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, ExperimentError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, msg: &str| ExperimentError::Csv { line: line + 1, msg: msg.to_string() };
        match lines.next() {
            None => return Err(err(0, "empty file, expected header `round,agent,metric,value`")),
            Some((i, h)) if h.trim() != "round,agent,metric,value" => return Err(err(i, "bad header")),
            _ => {}
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let [round, agent, metric, value] = f.as_slice() else { return Err(err(i, "expected 4 fields")) };
            let round = round.parse().map_err(|_| err(i, "bad round"))?;
            let agent = match *agent {
                "all" => None,
                a => Some(a.parse().map_err(|_| err(i, "bad agent"))?),
            };
            let value = value.parse().map_err(|_| err(i, "bad value"))?;
            rows.push(MetricRow { round, agent, metric: metric.to_string(), value });
        }
        if rows.is_empty() {
            return Err(err(0, "no data rows"));
        }
        Ok(Self { rows })
    }

    /// Network-wide series of `metric`, in round order.
    pub fn global(&self, metric: &str) -> Vec<(u64, f64)> {
        self.rows.iter().filter(|r| r.agent.is_none() && r.metric == metric).map(|r| (r.round, r.value)).collect()
    }

    /// Series of a per-agent `metric` for `agent`.
    pub fn agent(&self, metric: &str, agent: usize) -> Vec<(u64, f64)> {
        self.rows.iter().filter(|r| r.agent == Some(agent) && r.metric == metric).map(|r| (r.round, r.value)).collect()
    }

    pub fn last_round(&self) -> Option<u64> {
        self.rows.iter().map(|r| r.round).max()
    }

    /// First round at which the global `metric` satisfies `pred`.
    pub fn first_round(&self, metric: &str, pred: impl Fn(f64) -> bool) -> Option<u64> {
        self.global(metric).into_iter().find(|&(_, v)| pred(v)).map(|(r, _)| r)
    }

    /// Human-readable summary: final values and threshold crossings.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let Some(last) = self.last_round() else { return "no rows\n".into() };
        writeln!(out, "rounds: {}", last + 1).unwrap();
        let mut names: Vec<(&str, bool)> = Vec::new();
        for r in &self.rows {
            let key = (r.metric.as_str(), r.agent.is_none());
            if !names.contains(&key) {
                names.push(key);
            }
        }
        for (name, global) in &names {
            let finals: Vec<f64> = self.rows.iter().filter(|r| r.round == last && r.metric == *name && r.agent.is_none() == *global).map(|r| r.value).collect();
            if *global {
                writeln!(out, "final {name}: {:e}", finals[0]).unwrap();
            } else {
                let max = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = finals.iter().copied().fold(f64::INFINITY, f64::min);
                writeln!(out, "final {name} over agents: min {min:e}, max {max:e}").unwrap();
            }
        }
        let show = |r: Option<u64>| r.map(|v| v.to_string()).unwrap_or_else(|| "never".into());
        let has = |m: &str| names.iter().any(|(n, g)| *n == m && *g);
        if has("cost_error") {
            for thr in [1e-2, 1e-4] {
                writeln!(out, "first round with cost_error < {thr:e}: {}", show(self.first_round("cost_error", |v| v < thr))).unwrap();
            }
        }
        if has("coupling") {
            writeln!(out, "first feasible round (coupling <= {FEASIBILITY_TOL:e}): {}", show(self.first_round("coupling", |v| v <= FEASIBILITY_TOL))).unwrap();
        }
        if has("agreement") {
            writeln!(out, "agreement round: {}", show(self.first_round("agreement", |v| v == 1.0))).unwrap();
        }
        out
    }
}
