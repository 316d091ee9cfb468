//! End-to-end acceptance checks on the three benchmark experiments.
//!
//! Every criterion prints one `PASS`/`FAIL` line with the measured values
//! and the pinned tolerance, then asserts. Run with `--nocapture` to see the
//! lines.

use std::thread;
use std::time::{Duration, Instant};

use dopt::algorithms::{AlgorithmKind, History, StepSize};
use dopt::comms::{Roster, TcpTransport, DEFAULT_TIMEOUT};
use dopt::experiments::{
    centralized_oracle, compute_metrics, local_logistic_objective, run_agent, run_inproc, ExperimentKind, Instance,
    InstanceConfig, Metrics, RunSpec, FEASIBILITY_TOL,
};
use dopt::graph::Graph;

const SEED: u64 = 0;
const GRAPH_SEED: u64 = 1;
const GRAPH_P: f64 = 0.5;
const N: usize = 10;

fn verdict(name: &str, pass: bool, detail: &str) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn final_value(m: &Metrics, metric: &str) -> f64 {
    m.global(metric).last().expect("series present").1
}

/// Largest increase between consecutive values over the last 10% of rounds.
fn worst_rise_in_tail(m: &Metrics, metric: &str) -> f64 {
    let s = m.global(metric);
    let start = s.len() - s.len() / 10;
    s[start..].windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max)
}

fn spec(algorithm: AlgorithmKind, iterations: usize, step: StepSize) -> RunSpec {
    RunSpec { algorithm, iterations, step, seed: SEED, penalty: 1e3 }
}

fn instance(kind: ExperimentKind) -> (Instance, Graph) {
    let inst = Instance::generate(&InstanceConfig::new(kind, N, SEED)).unwrap();
    let g = Graph::random_binomial(N, GRAPH_P, GRAPH_SEED, kind.default_undirected()).unwrap();
    (inst, g)
}

#[test]
fn criterion_1_logistic_classification() {
    let started = Instant::now();
    let (inst, g) = instance(ExperimentKind::Logistic);
    let oracle = centralized_oracle(&inst).unwrap();

    let gt = spec(AlgorithmKind::GradientTracking, 20_000, StepSize::Constant(0.001));
    let hs = run_inproc(&gt, &g, &inst, DEFAULT_TIMEOUT).unwrap();
    let m_gt = compute_metrics(&inst, &oracle, gt.algorithm, &hs).unwrap();

    let sg = spec(AlgorithmKind::Subgradient, 20_000, StepSize::Diminishing(0.6));
    let hs_sg = run_inproc(&sg, &g, &inst, DEFAULT_TIMEOUT).unwrap();
    let m_sg = compute_metrics(&inst, &oracle, sg.algorithm, &hs_sg).unwrap();
    let elapsed = started.elapsed();

    let (gt_cost, gt_sol, sg_cost) = (final_value(&m_gt, "cost_error"), final_value(&m_gt, "solution_error"), final_value(&m_sg, "cost_error"));
    let rises = [
        worst_rise_in_tail(&m_gt, "cost_error"),
        worst_rise_in_tail(&m_gt, "solution_error"),
        worst_rise_in_tail(&m_sg, "cost_error"),
        worst_rise_in_tail(&m_sg, "solution_error"),
    ];
    let max_rise = rises.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ok = [
        verdict("1a gradient tracking cost error", gt_cost < 1e-4, &format!("{gt_cost:e} < 1e-4")),
        verdict("1b gradient tracking solution error", gt_sol < 1e-3, &format!("{gt_sol:e} < 1e-3")),
        verdict("1c subgradient cost error", sg_cost < 1e-2, &format!("{sg_cost:e} < 1e-2")),
        verdict("1d error series monotone over last 10% of rounds", max_rise <= 1e-12, &format!("largest rise {max_rise:e} <= 1e-12 (per series {rises:?})")),
        verdict("1e runtime", elapsed <= Duration::from_secs(300), &format!("{:.1}s <= 300s", elapsed.as_secs_f64())),
    ];
    assert!(ok.iter().all(|&b| b));
}

#[test]
fn criterion_2_svm_constraints_consensus() {
    let started = Instant::now();
    let (inst, g) = instance(ExperimentKind::Svm);
    let d = g.diameter().unwrap();
    let oracle = centralized_oracle(&inst).unwrap();
    let deadline = 2 * d + 2;
    let cc = spec(AlgorithmKind::ConstraintsConsensus, deadline + 5, StepSize::Constant(1.0));
    let hs = run_inproc(&cc, &g, &inst, DEFAULT_TIMEOUT).unwrap();
    let m = compute_metrics(&inst, &oracle, cc.algorithm, &hs).unwrap();
    let elapsed = started.elapsed();

    let agreed = m.first_round("agreement", |v| v == 1.0);
    let cost_gap = |t: usize| hs.iter().map(|h| (h.records[t].local_cost - oracle.f).abs()).fold(0.0, f64::max);
    let stays = (deadline..=deadline + 5).all(|t| {
        let tags: Vec<u64> = hs.iter().map(|h| h.records[t].aux[1].to_bits()).collect();
        tags.windows(2).all(|w| w[0] == w[1]) && cost_gap(t) <= 1e-8
    });
    let phi_max = (0..N).map(|i| m.agent("phi", i).last().unwrap().1).fold(f64::NEG_INFINITY, f64::max);
    let monotone = hs.iter().all(|h| h.records.windows(2).all(|w| w[1].local_cost >= w[0].local_cost - 1e-9));
    let ok = [
        verdict(
            "2a bases agree and costs match the oracle by round 2D+2",
            agreed.is_some_and(|r| r as usize <= deadline) && stays,
            &format!("D = {d}, agreement at round {agreed:?} <= {deadline}, max |f_i − f*| at deadline {:e} <= 1e-8, stable for 5 more rounds: {stays}", cost_gap(deadline)),
        ),
        verdict("2b final violation phi", phi_max <= 1e-9, &format!("max_i phi_i = {phi_max:e} <= 1e-9")),
        verdict("2c local costs non-decreasing", monotone, "up to 1e-9"),
        verdict("2d runtime", elapsed <= Duration::from_secs(60), &format!("{:.1}s <= 60s", elapsed.as_secs_f64())),
    ];
    assert!(ok.iter().all(|&b| b));
}

#[test]
fn criterion_3_microgrid() {
    let started = Instant::now();
    let (inst, g) = instance(ExperimentKind::Microgrid);
    let oracle = centralized_oracle(&inst).unwrap();
    let step = StepSize::Diminishing(0.6);

    let ds = spec(AlgorithmKind::DualSubgradient, 20_000, step);
    let hs = run_inproc(&ds, &g, &inst, DEFAULT_TIMEOUT).unwrap();
    let m_ds = compute_metrics(&inst, &oracle, ds.algorithm, &hs).unwrap();

    let pd = spec(AlgorithmKind::PrimalDecomposition, 20_000, step);
    let hs_pd = run_inproc(&pd, &g, &inst, DEFAULT_TIMEOUT).unwrap();
    let m_pd = compute_metrics(&inst, &oracle, pd.algorithm, &hs_pd).unwrap();
    let elapsed = started.elapsed();

    let cost = final_value(&m_ds, "cost_error");
    let coupling = final_value(&m_ds, "coupling");
    let first_feasible = m_ds.first_round("coupling", |v| v <= FEASIBILITY_TOL);
    let first_strict = m_ds.first_round("coupling", |v| v <= 0.0);
    let dual_star = oracle.coupling_duals.clone().unwrap().into_iter().fold(0.0, f64::max);
    let dual_peak = m_ds.global("max_dual").iter().map(|r| r.1).fold(0.0, f64::max);
    let pd_coupling = m_pd.global("coupling").iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let drift = m_pd.global("allocation_drift").iter().map(|r| r.1).fold(0.0, f64::max);
    let ok = [
        verdict("3a dual subgradient cost error", cost < 5e-2, &format!("{cost:e} < 5e-2")),
        verdict("3b dual subgradient final coupling", coupling <= 1e-3, &format!("{coupling:e} <= 1e-3")),
        verdict(
            "3c dual subgradient first feasible round",
            first_feasible.is_some_and(|r| r < 10_000),
            &format!("coupling <= {FEASIBILITY_TOL:e} from round {first_feasible:?} < 10000 (coupling <= 0 first at {first_strict:?})"),
        ),
        verdict("3d dual sequence bounded", dual_peak < 10.0 * dual_star, &format!("max mu {dual_peak:e} < 10 x mu* = {:e}", 10.0 * dual_star)),
        verdict("3e primal decomposition coupling at every round", pd_coupling <= 1e-9, &format!("max over rounds {pd_coupling:e} <= 1e-9")),
        verdict("3f primal decomposition allocation drift", drift < 1e-10, &format!("{drift:e} < 1e-10")),
        verdict("3g runtime", elapsed <= Duration::from_secs(600), &format!("{:.1}s <= 600s", elapsed.as_secs_f64())),
    ];
    assert!(ok.iter().all(|&b| b));
}

fn tcp_histories(spec: &RunSpec, g: &Graph, inst: &Instance, base_port: u16) -> Vec<History> {
    let roster = Roster::localhost(inst.n(), base_port).unwrap();
    thread::scope(|s| {
        let handles: Vec<_> = (0..inst.n())
            .map(|i| {
                let roster = roster.clone();
                s.spawn(move || {
                    let t = TcpTransport::bind(i, roster, DEFAULT_TIMEOUT).unwrap();
                    run_agent(spec, g, inst, i, Box::new(t)).unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

#[test]
fn criterion_4_invariants_and_replay() {
    // tracker conservation on the logistic instance
    let (inst, g) = instance(ExperimentKind::Logistic);
    let gt = spec(AlgorithmKind::GradientTracking, 500, StepSize::Constant(0.001));
    let hs = run_inproc(&gt, &g, &inst, DEFAULT_TIMEOUT).unwrap();
    let Instance::Logistic { data, c } = &inst else { unreachable!() };
    let fs: Vec<_> = data.iter().map(|d| local_logistic_objective(d, N, *c).unwrap()).collect();
    let mut worst = 0.0f64;
    for t in 0..=500 {
        for k in 0..3 {
            let s: f64 = hs.iter().map(|h| h.records[t].aux[k]).sum();
            let grad: f64 = fs.iter().zip(&hs).map(|(f, h)| f.subgradient(&h.records[t].iterate).unwrap()[k]).sum();
            worst = worst.max((s - grad).abs());
        }
    }
    let a = verdict("4a gradient tracking conservation", worst <= 1e-10, &format!("max |Σ s − Σ ∇f| = {worst:e} <= 1e-10"));

    // dual feasibility and allocation conservation over a short microgrid run
    let (mg, mg_graph) = instance(ExperimentKind::Microgrid);
    let ds = spec(AlgorithmKind::DualSubgradient, 300, StepSize::Diminishing(0.6));
    let hs_ds = run_inproc(&ds, &mg_graph, &mg, DEFAULT_TIMEOUT).unwrap();
    let min_mu = hs_ds.iter().flat_map(|h| h.records.iter().flat_map(|r| r.aux[16..].iter().copied())).fold(f64::INFINITY, f64::min);
    let b = verdict("4b dual iterates nonnegative", min_mu >= 0.0, &format!("min mu = {min_mu:e} >= 0"));

    // identical runs over loopback TCP and in process
    let replay = [
        (ExperimentKind::Logistic, gt.clone(), 47_400u16),
        (ExperimentKind::Svm, spec(AlgorithmKind::ConstraintsConsensus, 10, StepSize::Constant(1.0)), 47_420),
        (ExperimentKind::Microgrid, spec(AlgorithmKind::PrimalDecomposition, 200, StepSize::Diminishing(0.6)), 47_440),
    ];
    let mut same = true;
    for (kind, s, port) in replay {
        let (inst, g) = instance(kind);
        let inproc = run_inproc(&s, &g, &inst, DEFAULT_TIMEOUT).unwrap();
        let tcp = tcp_histories(&s, &g, &inst, port);
        let identical = inproc.iter().zip(&tcp).all(|(x, y)| x.to_csv() == y.to_csv());
        same &= verdict(&format!("4c in-process vs TCP histories bit-identical ({kind})"), identical, &format!("{} agents", inst.n()));
    }
    assert!(a && b && same);
}
