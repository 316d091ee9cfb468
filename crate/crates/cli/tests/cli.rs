use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dopt"))
        .args(args)
        .current_dir(dir)
        .env_remove("DOPT_SEED")
        .output()
        .expect("spawn dopt")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "status {:?}\nstderr: {}", out.status, String::from_utf8_lossy(&out.stderr));
}

fn read(dir: &Path, p: &str) -> String {
    fs::read_to_string(dir.join(p)).unwrap()
}

fn manifest_value(text: &str, key: &str) -> String {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key} = "))).unwrap().to_string()
}

#[test]
fn logistic_run_writes_all_outputs() {
    let d = TempDir::new().unwrap();
    let out = dopt(&["run", "--experiment", "logistic", "--algorithm", "gradient_tracking", "--n", "20", "--iterations", "20000", "--output", "o"], d.path());
    ok(&out);
    let csv = read(d.path(), "o/metrics.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("round,agent,metric,value"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 4));
    let local = rows.iter().filter(|r| r[2] == "local_cost").count();
    assert_eq!(local, 20001 * 20);
    assert!(rows.iter().any(|r| r[0] == "20000" && r[1] == "all" && r[2] == "cost_error"));
    for i in 0..20 {
        assert!(d.path().join(format!("o/history_{i}.csv")).exists());
    }
    assert!(d.path().join("o/instance.bin").exists());
    assert_eq!(manifest_value(&read(d.path(), "o/manifest.txt"), "instance_hash").len(), 64);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("rounds: 20001"), "{stdout}");
}

#[test]
fn mismatched_algorithm_is_a_config_error() {
    let d = TempDir::new().unwrap();
    let out = dopt(&["run", "--experiment", "svm", "--algorithm", "subgradient", "--output", "o"], d.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("subgradient"));
    assert!(!d.path().join("o").exists());
}

#[test]
fn bad_config_file_names_the_line() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("c.conf"), "experiment = logistic\n\nwat = 1\n").unwrap();
    let out = dopt(&["run", "--config", "c.conf"], d.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn tcp_and_inproc_metrics_are_byte_identical() {
    let d = TempDir::new().unwrap();
    let common = ["run", "--experiment", "microgrid", "--algorithm", "dual_subgradient", "--n", "5", "--iterations", "200"];
    let a = dopt(&[&common[..], &["--output", "a"]].concat(), d.path());
    ok(&a);
    let b = dopt(&[&common[..], &["--output", "b", "--transport", "tcp", "--base-port", "47600"]].concat(), d.path());
    ok(&b);
    assert_eq!(fs::read(d.path().join("a/metrics.csv")).unwrap(), fs::read(d.path().join("b/metrics.csv")).unwrap());
    assert!(d.path().join("b/roster.txt").exists());
}

#[test]
fn manifest_reproduces_the_run() {
    let d = TempDir::new().unwrap();
    ok(&dopt(&["run", "--experiment", "svm", "--algorithm", "constraints_consensus", "--n", "6", "--iterations", "12", "--seed", "4", "--output", "a"], d.path()));
    ok(&dopt(&["run", "--config", "a/manifest.txt", "--output", "b"], d.path()));
    assert_eq!(read(d.path(), "a/metrics.csv"), read(d.path(), "b/metrics.csv"));

    // a manifest whose hash no longer matches the generated instance is rejected
    let tampered = read(d.path(), "a/manifest.txt").replace("seed = 4", "seed = 5");
    fs::write(d.path().join("t.txt"), tampered).unwrap();
    assert_eq!(dopt(&["run", "--config", "t.txt", "--output", "c"], d.path()).status.code(), Some(1));
}

#[test]
fn seed_environment_overrides_flags() {
    let d = TempDir::new().unwrap();
    let args = ["run", "--experiment", "microgrid", "--algorithm", "primal_decomposition", "--n", "4", "--iterations", "5", "--seed", "1"];
    ok(&dopt(&[&args[..], &["--output", "a"]].concat(), d.path()));
    let out = Command::new(env!("CARGO_BIN_EXE_dopt"))
        .args([&args[..], &["--output", "b"]].concat())
        .current_dir(d.path())
        .env("DOPT_SEED", "9")
        .output()
        .unwrap();
    ok(&out);
    let (ma, mb) = (read(d.path(), "a/manifest.txt"), read(d.path(), "b/manifest.txt"));
    assert_eq!(manifest_value(&mb, "seed"), "9");
    assert_ne!(manifest_value(&ma, "instance_hash"), manifest_value(&mb, "instance_hash"));
}

#[test]
fn custom_instance_file_runs() {
    let d = TempDir::new().unwrap();
    ok(&dopt(&["run", "--experiment", "microgrid", "--algorithm", "primal_decomposition", "--n", "4", "--iterations", "50", "--output", "a"], d.path()));
    let out = dopt(&["run", "--experiment", "custom", "--instance", "a/instance.bin", "--algorithm", "primal_decomposition", "--iterations", "50", "--output", "b"], d.path());
    ok(&out);
    assert_eq!(read(d.path(), "a/metrics.csv"), read(d.path(), "b/metrics.csv"));
    let out = dopt(&["run", "--experiment", "custom", "--instance", "a/instance.bin", "--algorithm", "gradient_tracking", "--output", "c"], d.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_summarizes_and_rejects_bad_files() {
    let d = TempDir::new().unwrap();
    ok(&dopt(&["run", "--experiment", "svm", "--algorithm", "constraints_consensus", "--n", "5", "--iterations", "10", "--output", "a"], d.path()));
    let out = dopt(&["report", "a/metrics.csv"], d.path());
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rounds: 11") && text.contains("agreement round"), "{text}");

    fs::write(d.path().join("empty.csv"), "").unwrap();
    let out = dopt(&["report", "empty.csv"], d.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    fs::write(d.path().join("bad.csv"), "round,agent,metric,value\n0,all,cost_error,0.5\n1,all,cost_error\n").unwrap();
    let out = dopt(&["report", "bad.csv"], d.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unreachable_neighbor_times_out() {
    // agent 0 alone over TCP: its neighbors never start
    let d = TempDir::new().unwrap();
    let out = dopt(
        &["run", "--experiment", "logistic", "--algorithm", "subgradient", "--n", "3", "--graph-p", "1", "--iterations", "3", "--transport", "tcp", "--base-port", "47650", "--agent-id", "0", "--timeout", "0.5", "--output", "o"],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
