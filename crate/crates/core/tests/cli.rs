use std::path::Path;
use std::process::Command;

use igrl::cli::dispatch;
use igrl::eval::load_results;
use igrl::scenario::{load_network, ValidationProfile};

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("igrl").chain(args.iter().copied()))
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_with_two() {
    let bin = env!("CARGO_BIN_EXE_igrl");
    let out = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(Command::new(bin).output().unwrap().status.code(), Some(2));
    assert_eq!(Command::new(bin).args(["eval", "--policy", "fixed"]).output().unwrap().status.code(), Some(2));
    assert_eq!(Command::new(bin).arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["gen-demand", "--network", &p(dir.path(), "missing.txt"), "--out", &p(dir.path(), "t.txt")]), 1);
    std::fs::write(dir.path().join("bad.cfg"), "gamma = 3.0\n").unwrap();
    assert_eq!(run(&["train", "--config", &p(dir.path(), "bad.cfg"), "--out", &p(dir.path(), "o")]), 1);
}

#[test]
fn generated_network_passes_validation() {
    let dir = tempfile::tempdir().unwrap();
    let net = p(dir.path(), "net.txt");
    assert_eq!(run(&["gen-net", "--seed", "7", "--out", &net]), 0);
    load_network(&net).unwrap().validate(ValidationProfile::Generated).unwrap();
    let again = p(dir.path(), "again.txt");
    assert_eq!(run(&["gen-net", "--seed", "7", "--out", &again]), 0);
    assert_eq!(std::fs::read(&net).unwrap(), std::fs::read(&again).unwrap());
    assert_eq!(run(&["gen-demand", "--network", &net, "--seed", "3", "--horizon", "120", "--out", &p(dir.path(), "t.txt")]), 0);
    assert_eq!(run(&["inspect-graph", "--network", &net, "--steps", "20", "--full"]), 0);
}

#[test]
fn eval_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let net = p(dir.path(), "net.txt");
    assert_eq!(run(&["gen-net", "--seed", "3", "--intersections", "2", "--out", &net]), 0);
    for policy in ["fixed", "greedy"] {
        let out = p(dir.path(), policy);
        assert_eq!(run(&["eval", "--policy", policy, "--network", &net, "--seeds", "2", "--jobs", "2", "--out", &out]), 0);
        for f in ["trips.csv", "delay.csv", "summary.csv", "paired.csv", "report.svg"] {
            assert!(dir.path().join(policy).join(f).exists(), "{policy}/{f}");
        }
    }
    let a = p(dir.path(), "greedy/greedy.results");
    let b = p(dir.path(), "fixed/fixed.results");
    assert_eq!(load_results(&a).unwrap().len(), 2);
    let report = p(dir.path(), "cmp");
    assert_eq!(run(&["compare", "--a", &a, "--b", &b, "--out", &report]), 0);
    let paired = std::fs::read_to_string(dir.path().join("cmp/paired.csv")).unwrap();
    assert!(paired.lines().count() > 100);
    assert!(paired.lines().any(|l| l.starts_with('#')));
    // results from different scenarios cannot be paired
    let other = p(dir.path(), "other");
    assert_eq!(run(&["eval", "--policy", "fixed", "--network", &net, "--seed", "5", "--seeds", "2", "--out", &other]), 0);
    assert_eq!(run(&["compare", "--a", &a, "--b", &p(dir.path(), "other/fixed.results")]), 1);
}

#[test]
fn generalist_checkpoint_runs_zero_shot_and_marl_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.cfg");
    std::fs::write(
        &cfg,
        "training_set = \"generalist\"\ngeneralist_networks = 2\nintersections = 2\nsims = 2\n\
         total_steps = 400\nwarmup = 50\nlog_every = 10\ncheckpoint_every = 100\n",
    )
    .unwrap();
    let out = p(dir.path(), "g");
    assert_eq!(run(&["train", "--config", &cfg.to_string_lossy(), "--seed", "1", "--out", &out]), 0);
    for f in ["model.bin", "train_log.csv", "episode_rewards.csv", "model_00000100.bin"] {
        assert!(dir.path().join("g").join(f).exists(), "{f}");
    }
    let held_out = p(dir.path(), "held_out.txt");
    assert_eq!(run(&["gen-net", "--seed", "12345", "--intersections", "3", "--out", &held_out]), 0);
    let model = p(dir.path(), "g/model.bin");
    assert_eq!(run(&["eval", "--policy", &model, "--network", &held_out, "--seeds", "1", "--out", &p(dir.path(), "e")]), 0);
    assert_eq!(load_results(dir.path().join("e/model.results")).unwrap().len(), 1);

    let s = dir.path().join("s.cfg");
    std::fs::write(&s, "intersections = 2\nsims = 1\ntotal_steps = 100\nwarmup = 20\n").unwrap();
    let m = p(dir.path(), "m");
    assert_eq!(run(&["train", "--config", &s.to_string_lossy(), "--marl", "--out", &m]), 0);
    let marl = format!("marl:{}", p(dir.path(), "m/marl.bin"));
    assert_eq!(run(&["eval", "--policy", &marl, "--network", &held_out, "--seeds", "1", "--out", &p(dir.path(), "x")]), 1);
}
