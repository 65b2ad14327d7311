use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irs-autocorr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.conf");
    fs::write(&path, "scenario.n_x = 2\nscenario.n_z = 2\nexperiment.trials = 2\nexperiment.t_grid = N, 2N\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn outputs_are_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_config(dir.path());
    for cmd in ["convergence", "error-vs-t", "gain-vs-t"] {
        let a = run(&[cmd, "--config", &conf, "--seed", "5"]);
        let b = run(&[cmd, "--config", &conf, "--seed", "5", "--parallel", "2"]);
        assert!(a.status.success(), "{cmd}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{cmd}");
        let c = run(&[cmd, "--config", &conf, "--seed", "6"]);
        assert_ne!(a.stdout, c.stdout, "{cmd}");
    }
}

#[test]
fn trials_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_config(dir.path());
    let out = run(&["error-vs-t", "--config", &conf, "--trials", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    // Two T values, two schemes, one trial.
    assert_eq!(text.lines().count(), 2 + 4);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "scenario.n_x = 2\nscenario.nx = 3\n").unwrap();
    let out = run(&["convergence", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(run(&["convergence", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_or_empty_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["estimate", missing.to_str().unwrap()]).status.code(), Some(4));
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = run(&["estimate", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let unwritable = dir.path().join("no/such/dir/out.csv");
    assert_eq!(run(&["gen-campaign", "--out", unwritable.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn generated_campaign_round_trips_through_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_config(dir.path());
    let camp = dir.path().join("camp.csv");
    let truth = dir.path().join("truth.csv");
    let matrix = dir.path().join("h.csv");
    let out = run(&[
        "gen-campaign",
        "--config",
        &conf,
        "--t",
        "20",
        "--trial",
        "1",
        "--out",
        camp.to_str().unwrap(),
        "--truth-out",
        truth.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&camp).unwrap().lines().count(), 2 + 20);

    let out = run(&[
        "estimate",
        camp.to_str().unwrap(),
        "--config",
        &conf,
        "--truth",
        truth.to_str().unwrap(),
        "--matrix-out",
        matrix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[0], "converged");
    let error: f64 = row[5].parse().unwrap();
    assert!(error < 1e-4, "error {error}");
    assert_eq!(fs::read_to_string(&matrix).unwrap().lines().count(), 1 + 25);

    let again = dir.path().join("again.csv");
    run(&["gen-campaign", "--config", &conf, "--t", "20", "--trial", "1", "--out", again.to_str().unwrap()]);
    assert_eq!(fs::read(&camp).unwrap(), fs::read(&again).unwrap());
}
