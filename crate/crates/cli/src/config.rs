//! Run configuration: defaults, `key = value` files, flags, environment.

use std::fmt::Write as _;
use std::path::PathBuf;

use dopt::algorithms::{AlgorithmKind, StepSize};
use dopt::experiments::ExperimentKind;

/// Environment variable overriding `seed`.
pub const SEED_ENV: &str = "DOPT_SEED";

/// Every key a config file (and a manifest) may carry, in output order.
/// Flags use the same names with `-` for `_`.
pub const KEYS: &[&str] = &[
    "experiment",
    "instance",
    "algorithm",
    "n",
    "iterations",
    "step",
    "graph_p",
    "graph_seed",
    "undirected",
    "transport",
    "roster",
    "base_port",
    "seed",
    "output",
    "c",
    "horizon",
    "penalty",
    "budget_factor",
    "cost_lo",
    "cost_hi",
    "timeout",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Builtin(ExperimentKind),
    /// Loaded from an instance file written by an earlier run.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Inproc,
    Tcp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub instance: Option<PathBuf>,
    pub algorithm: Option<AlgorithmKind>,
    pub n: usize,
    pub iterations: usize,
    pub step: Option<StepSize>,
    pub graph_p: f64,
    pub graph_seed: u64,
    pub undirected: Option<bool>,
    pub transport: TransportKind,
    pub roster: Option<PathBuf>,
    pub base_port: u16,
    pub seed: u64,
    pub output: PathBuf,
    pub c: f64,
    pub horizon: usize,
    pub penalty: f64,
    pub budget_factor: f64,
    pub cost_lo: f64,
    pub cost_hi: f64,
    /// Seconds to wait for any single message.
    pub timeout: f64,
    /// Set when re-ingesting a manifest; the regenerated instance must match.
    pub instance_hash: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            instance: None,
            algorithm: None,
            n: 10,
            iterations: 1000,
            step: None,
            graph_p: 0.5,
            graph_seed: 1,
            undirected: None,
            transport: TransportKind::Inproc,
            roster: None,
            base_port: 47000,
            seed: 0,
            output: PathBuf::from("dopt-out"),
            c: 10.0,
            horizon: 8,
            penalty: 1e3,
            budget_factor: 0.95,
            cost_lo: 0.05,
            cost_hi: 0.1,
            timeout: 30.0,
            instance_hash: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse `{v}`"))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn apply(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "experiment" => {
                self.experiment = Some(if v == "custom" { Experiment::Custom } else { Experiment::Builtin(v.parse()?) });
            }
            "instance" => self.instance = Some(PathBuf::from(v)),
            "algorithm" => self.algorithm = Some(v.parse()?),
            "n" => self.n = num(key, v)?,
            "iterations" => self.iterations = num(key, v)?,
            "step" => self.step = Some(v.parse()?),
            "graph_p" => self.graph_p = num(key, v)?,
            "graph_seed" => self.graph_seed = num(key, v)?,
            "undirected" => self.undirected = Some(num(key, v)?),
            "transport" => {
                self.transport = match v {
                    "inproc" => TransportKind::Inproc,
                    "tcp" => TransportKind::Tcp,
                    _ => return Err(format!("transport: expected inproc or tcp, got `{v}`")),
                }
            }
            "roster" => self.roster = Some(PathBuf::from(v)),
            "base_port" => self.base_port = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "output" => self.output = PathBuf::from(v),
            "c" => self.c = num(key, v)?,
            "horizon" => self.horizon = num(key, v)?,
            "penalty" => self.penalty = num(key, v)?,
            "budget_factor" => self.budget_factor = num(key, v)?,
            "cost_lo" => self.cost_lo = num(key, v)?,
            "cost_hi" => self.cost_hi = num(key, v)?,
            "timeout" => self.timeout = num(key, v)?,
            "instance_hash" => self.instance_hash = Some(v.to_string()),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            self.apply(k.trim(), v.trim()).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    /// A seed override also drops any recorded instance hash, which
    /// described the instance of the old seed.
    pub fn apply_env(&mut self) -> Result<(), String> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed = num(SEED_ENV, &v)?;
            if seed != self.seed {
                self.instance_hash = None;
            }
            self.seed = seed;
        }
        Ok(())
    }

    /// Fills algorithm-dependent defaults and checks the whole configuration.
    pub fn finalize(&mut self) -> Result<(), String> {
        let experiment = self.experiment.ok_or("experiment is required")?;
        let algorithm = self.algorithm.ok_or("algorithm is required")?;
        match experiment {
            Experiment::Builtin(kind) => {
                kind.check(algorithm).map_err(|e| e.to_string())?;
                if self.undirected.is_none() {
                    self.undirected = Some(kind.default_undirected());
                }
            }
            Experiment::Custom if self.instance.is_none() => return Err("experiment custom needs an instance file".into()),
            Experiment::Custom => {}
        }
        let step = *self.step.get_or_insert(match algorithm {
            AlgorithmKind::GradientTracking => StepSize::Constant(0.001),
            AlgorithmKind::ConstraintsConsensus => StepSize::Constant(1.0),
            _ => StepSize::Diminishing(0.6),
        });
        step.validate()?;
        if self.n == 0 {
            return Err("n must be at least 1".into());
        }
        if !(self.graph_p > 0.0 && self.graph_p <= 1.0) {
            return Err(format!("graph_p must lie in (0, 1], got {}", self.graph_p));
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(format!("timeout must be positive, got {}", self.timeout));
        }
        if algorithm == AlgorithmKind::PrimalDecomposition && self.undirected == Some(false) {
            return Err("primal_decomposition needs an undirected graph".into());
        }
        if !(self.cost_lo <= self.cost_hi) {
            return Err("cost_lo must not exceed cost_hi".into());
        }
        Ok(())
    }

    pub fn algorithm(&self) -> AlgorithmKind {
        self.algorithm.expect("finalized")
    }

    pub fn step(&self) -> StepSize {
        self.step.expect("finalized")
    }

    /// `key = value` text that [`RunConfig::apply_file`] reads back into the
    /// same configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let v = match *key {
                "experiment" => match self.experiment {
                    Some(Experiment::Builtin(k)) => k.to_string(),
                    Some(Experiment::Custom) => "custom".into(),
                    None => continue,
                },
                "instance" => match &self.instance {
                    Some(p) => p.display().to_string(),
                    None => continue,
                },
                "algorithm" => match self.algorithm {
                    Some(a) => a.to_string(),
                    None => continue,
                },
                "n" => self.n.to_string(),
                "iterations" => self.iterations.to_string(),
                "step" => match self.step {
                    Some(s) => s.to_string(),
                    None => continue,
                },
                "graph_p" => format!("{:?}", self.graph_p),
                "graph_seed" => self.graph_seed.to_string(),
                "undirected" => match self.undirected {
                    Some(u) => u.to_string(),
                    None => continue,
                },
                "transport" => match self.transport {
                    TransportKind::Inproc => "inproc".into(),
                    TransportKind::Tcp => "tcp".into(),
                },
                "roster" => match &self.roster {
                    Some(p) => p.display().to_string(),
                    None => continue,
                },
                "base_port" => self.base_port.to_string(),
                "seed" => self.seed.to_string(),
                "output" => self.output.display().to_string(),
                "c" => format!("{:?}", self.c),
                "horizon" => self.horizon.to_string(),
                "penalty" => format!("{:?}", self.penalty),
                "budget_factor" => format!("{:?}", self.budget_factor),
                "cost_lo" => format!("{:?}", self.cost_lo),
                "cost_hi" => format!("{:?}", self.cost_hi),
                "timeout" => format!("{:?}", self.timeout),
                _ => unreachable!("every key is listed"),
            };
            writeln!(out, "{key} = {v}").expect("write to string");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        let mut c = RunConfig::default();
        c.apply("experiment", "microgrid").unwrap();
        c.apply("algorithm", "primal_decomposition").unwrap();
        c
    }

    #[test]
    fn text_round_trip() {
        let mut c = base();
        c.apply_file("n = 7 # agents\nstep = diminishing:0.75\n\ngraph_p = 0.3\n").unwrap();
        c.finalize().unwrap();
        let mut back = RunConfig::default();
        back.apply_file(&c.to_text()).unwrap();
        back.finalize().unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn errors_name_the_line() {
        let e = RunConfig::default().apply_file("n = 3\nbogus = 1\n").unwrap_err();
        assert!(e.starts_with("line 2"), "{e}");
        let e = RunConfig::default().apply_file("n 3\n").unwrap_err();
        assert!(e.starts_with("line 1"), "{e}");
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.apply("experiment", "svm").unwrap();
        c.apply("algorithm", "subgradient").unwrap();
        assert!(c.finalize().is_err());

        let mut c = base();
        c.apply("undirected", "false").unwrap();
        assert!(c.finalize().is_err());

        let mut c = base();
        assert!(c.apply("step", "diminishing:0.3").is_err());
        c.finalize().unwrap();
        assert_eq!(c.step(), StepSize::Diminishing(0.6));
        assert_eq!(c.undirected, Some(true));

        assert!(RunConfig::default().finalize().is_err());
    }
}
