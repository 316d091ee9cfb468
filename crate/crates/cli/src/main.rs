//! `dopt`: run distributed optimization experiments and summarize their metrics.
//!
//! Exit status: 0 success, 1 configuration or input error, 2 runtime
//! failure, 3 a neighbor timed out.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dopt::experiments::Metrics;

use config::RunConfig;
use run::CliError;

#[derive(Parser)]
#[command(name = "dopt", version, about = "Distributed optimization over simulated or TCP-connected agents")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write metrics, histories and a manifest.
    Run(RunArgs),
    /// Summarize a metrics.csv file.
    Report {
        metrics: PathBuf,
    },
}

/// Every value is optional here; defaults and checks live in `RunConfig`.
/// Precedence: defaults, then `--config`, then flags, then `DOPT_SEED`.
#[derive(Args)]
struct RunArgs {
    /// `key = value` file, e.g. a manifest.txt from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only this agent over TCP (normally spawned by the launcher).
    #[arg(long)]
    agent_id: Option<usize>,
    /// logistic, svm, microgrid or custom.
    #[arg(long)]
    experiment: Option<String>,
    /// Instance file for `--experiment custom`.
    #[arg(long)]
    instance: Option<String>,
    /// subgradient, gradient_tracking, constraints_consensus,
    /// dual_subgradient or primal_decomposition.
    #[arg(long)]
    algorithm: Option<String>,
    /// Number of agents.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    /// `constant:<alpha>` or `diminishing:<p>` with p in (0.5, 1].
    #[arg(long)]
    step: Option<String>,
    /// Edge probability of the random communication graph.
    #[arg(long)]
    graph_p: Option<String>,
    #[arg(long)]
    graph_seed: Option<String>,
    /// Force an undirected graph.
    #[arg(long, conflicts_with = "directed")]
    undirected: bool,
    /// Force a directed graph.
    #[arg(long)]
    directed: bool,
    /// inproc or tcp.
    #[arg(long)]
    transport: Option<String>,
    /// `id host port` lines; defaults to localhost from the base port.
    #[arg(long)]
    roster: Option<String>,
    #[arg(long)]
    base_port: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    output: Option<String>,
    /// Logistic regularization weight.
    #[arg(long)]
    c: Option<String>,
    /// Microgrid horizon.
    #[arg(long)]
    horizon: Option<String>,
    /// Slack penalty for primal decomposition.
    #[arg(long)]
    penalty: Option<String>,
    /// Microgrid budget per step as a multiple of N.
    #[arg(long)]
    budget_factor: Option<String>,
    #[arg(long)]
    cost_lo: Option<String>,
    #[arg(long)]
    cost_hi: Option<String>,
    /// Seconds to wait for a neighbor's message.
    #[arg(long)]
    timeout: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            cfg.apply_file(&text).map_err(|e| format!("{}: {e}", p.display()))?;
        }
        let flags = [
            ("experiment", &self.experiment),
            ("instance", &self.instance),
            ("algorithm", &self.algorithm),
            ("n", &self.n),
            ("iterations", &self.iterations),
            ("step", &self.step),
            ("graph_p", &self.graph_p),
            ("graph_seed", &self.graph_seed),
            ("transport", &self.transport),
            ("roster", &self.roster),
            ("base_port", &self.base_port),
            ("seed", &self.seed),
            ("output", &self.output),
            ("c", &self.c),
            ("horizon", &self.horizon),
            ("penalty", &self.penalty),
            ("budget_factor", &self.budget_factor),
            ("cost_lo", &self.cost_lo),
            ("cost_hi", &self.cost_hi),
            ("timeout", &self.timeout),
        ];
        for (key, v) in flags {
            if let Some(v) = v {
                cfg.apply(key, v).map_err(|e| format!("--{}: {e}", key.replace('_', "-")))?;
            }
        }
        if self.undirected {
            cfg.undirected = Some(true);
        }
        if self.directed {
            cfg.undirected = Some(false);
        }
        cfg.apply_env()?;
        cfg.finalize()?;
        Ok(cfg)
    }
}

fn report(path: &PathBuf) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let m = Metrics::parse_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    print!("{}", m.report());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Report { metrics } => report(metrics),
        Cmd::Run(args) => match args.resolve() {
            Err(e) => Err(CliError::Config(e)),
            Ok(cfg) => {
                let out = cfg.output.clone();
                run::run(cfg, args.agent_id).map(|m| {
                    if let Some(m) = m {
                        print!("{}", m.report());
                        println!("outputs in {}", out.display());
                    }
                })
            }
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dopt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
