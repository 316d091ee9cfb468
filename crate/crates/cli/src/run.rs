//! `dopt run`: build the instance and graph, execute, write outputs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use dopt::algorithms::{AlgorithmKind, History};
use dopt::comms::{Roster, TcpTransport};
use dopt::experiments::{
    centralized_oracle, compute_metrics, decode_instance, encode_instance, instance_hash, run_agent, run_inproc,
    ExperimentError, Instance, InstanceConfig, Metrics, MicrogridParams, RunSpec,
};
use dopt::graph::Graph;
use log::{info, warn};

use crate::config::{Experiment, RunConfig, TransportKind};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Timeout(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Timeout(_) => EXIT_TIMEOUT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
            CliError::Timeout(m) => write!(f, "timeout: {m}"),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let msg = e.to_string();
        match e {
            ExperimentError::Mismatch { .. } | ExperimentError::Format(_) | ExperimentError::Csv { .. } => CliError::Config(msg),
            _ if e.is_timeout() => CliError::Timeout(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn history_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("history_{i}.csv"))
}

fn load_instance(cfg: &mut RunConfig) -> Result<Instance, CliError> {
    let inst = match cfg.experiment.expect("finalized") {
        Experiment::Builtin(kind) => {
            let mut ic = InstanceConfig::new(kind, cfg.n, cfg.seed);
            ic.c = cfg.c;
            ic.horizon = cfg.horizon;
            ic.microgrid = MicrogridParams { cost_range: (cfg.cost_lo, cfg.cost_hi), budget_factor: cfg.budget_factor, ..Default::default() };
            Instance::generate(&ic)?
        }
        Experiment::Custom => {
            let path = cfg.instance.as_ref().expect("finalized");
            let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let inst = decode_instance(&bytes)?;
            inst.kind().check(cfg.algorithm())?;
            let undirected = *cfg.undirected.get_or_insert(inst.kind().default_undirected());
            if cfg.algorithm() == AlgorithmKind::PrimalDecomposition && !undirected {
                return Err(CliError::Config("primal_decomposition needs an undirected graph".into()));
            }
            if inst.n() != cfg.n {
                info!("instance file has {} agents; using that instead of n = {}", inst.n(), cfg.n);
                cfg.n = inst.n();
            }
            inst
        }
    };
    let hash = instance_hash(&encode_instance(&inst));
    match &cfg.instance_hash {
        Some(want) if *want != hash => {
            Err(CliError::Config(format!("instance hash {hash} does not match the recorded {want}")))
        }
        _ => {
            cfg.instance_hash = Some(hash);
            Ok(inst)
        }
    }
}

fn run_spec(cfg: &RunConfig) -> RunSpec {
    RunSpec { algorithm: cfg.algorithm(), iterations: cfg.iterations, step: cfg.step(), seed: cfg.seed, penalty: cfg.penalty }
}

fn roster(cfg: &RunConfig) -> Result<Roster, CliError> {
    let r = match &cfg.roster {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Roster::parse(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => Roster::localhost(cfg.n, cfg.base_port).map_err(|e| CliError::Config(e.to_string()))?,
    };
    if r.n() != cfg.n {
        return Err(CliError::Config(format!("roster lists {} agents, run has {}", r.n(), cfg.n)));
    }
    Ok(r)
}

/// Entry point for `dopt run`. With `agent_id` set this process is a single
/// TCP agent and only writes its own history file.
pub fn run(mut cfg: RunConfig, agent_id: Option<usize>) -> Result<Option<Metrics>, CliError> {
    let inst = load_instance(&mut cfg)?;
    let graph = Graph::random_binomial(cfg.n, cfg.graph_p, cfg.graph_seed, cfg.undirected.expect("finalized"))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let spec = run_spec(&cfg);
    let timeout = Duration::from_secs_f64(cfg.timeout);
    fs::create_dir_all(&cfg.output).map_err(|e| io_err(&cfg.output, e))?;

    if let Some(id) = agent_id {
        if cfg.transport != TransportKind::Tcp {
            return Err(CliError::Config("--agent-id needs the tcp transport".into()));
        }
        if id >= cfg.n {
            return Err(CliError::Config(format!("agent id {id} out of range for {} agents", cfg.n)));
        }
        let t = TcpTransport::bind(id, roster(&cfg)?, timeout).map_err(|e| CliError::from(ExperimentError::from(e)))?;
        let h = run_agent(&spec, &graph, &inst, id, Box::new(t))?;
        write(&history_path(&cfg.output, id), h.to_csv())?;
        return Ok(None);
    }

    info!("{} agents, {} iterations of {}", cfg.n, cfg.iterations, cfg.algorithm());
    let histories = match cfg.transport {
        TransportKind::Inproc => {
            let hs = run_inproc(&spec, &graph, &inst, timeout)?;
            for (i, h) in hs.iter().enumerate() {
                write(&history_path(&cfg.output, i), h.to_csv())?;
            }
            hs
        }
        TransportKind::Tcp => launch_tcp(&cfg)?,
    };
    let oracle = centralized_oracle(&inst)?;
    let metrics = compute_metrics(&inst, &oracle, cfg.algorithm(), &histories)?;
    write(&cfg.output.join("instance.bin"), encode_instance(&inst))?;
    let mut manifest = cfg.to_text();
    manifest.push_str(&format!("instance_hash = {}\n", cfg.instance_hash.as_deref().expect("set by load_instance")));
    write(&cfg.output.join("manifest.txt"), manifest)?;
    write(&cfg.output.join("metrics.csv"), metrics.to_csv())?;
    Ok(Some(metrics))
}

/// Spawns one child process per agent and collects their history files.
fn launch_tcp(cfg: &RunConfig) -> Result<Vec<History>, CliError> {
    let roster_path = cfg.output.join("roster.txt");
    write(&roster_path, roster(cfg)?.to_text())?;
    let mut child_cfg = cfg.clone();
    child_cfg.roster = Some(roster_path.clone());
    let mut conf = child_cfg.to_text();
    conf.push_str(&format!("instance_hash = {}\n", cfg.instance_hash.as_deref().expect("set by load_instance")));
    let conf_path = cfg.output.join("run.conf");
    write(&conf_path, conf)?;

    let exe = std::env::current_exe().map_err(|e| CliError::Runtime(format!("cannot locate own executable: {e}")))?;
    let mut children = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let child = Command::new(&exe)
            .arg("run")
            .arg("--config")
            .arg(&conf_path)
            .arg("--agent-id")
            .arg(i.to_string())
            .spawn()
            .map_err(|e| CliError::Runtime(format!("spawning agent {i}: {e}")))?;
        children.push(child);
    }
    let mut worst: Option<(usize, i32)> = None;
    for (i, mut child) in children.into_iter().enumerate() {
        let status = child.wait().map_err(|e| CliError::Runtime(format!("waiting for agent {i}: {e}")))?;
        let code = status.code().unwrap_or(EXIT_RUNTIME);
        if code != 0 {
            warn!("agent {i} exited with status {code}");
            // a real failure outranks the timeouts it causes in its neighbors
            let rank = |c: i32| if c == EXIT_TIMEOUT { 0 } else { 1 };
            if worst.is_none_or(|(_, w)| rank(code) > rank(w)) {
                worst = Some((i, code));
            }
        }
    }
    if let Some((i, code)) = worst {
        let msg = format!("agent {i} exited with status {code}");
        return Err(if code == EXIT_TIMEOUT { CliError::Timeout(msg) } else { CliError::Runtime(msg) });
    }
    (0..cfg.n)
        .map(|i| {
            let p = history_path(&cfg.output, i);
            let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
            History::from_csv(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))
        })
        .collect()
}
