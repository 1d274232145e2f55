use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hydrospin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydrospin"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no {key} line in:\n{text}"))
}

fn num(text: &str, key: &str) -> f64 {
    value(text, key).split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn gate_swap_writes_train() {
    let dir = tempfile::tempdir().unwrap();
    let o = hydrospin(dir.path(), &["gate", "swap_en"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(num(&out, "cycles"), 6400.0);
    assert_eq!(num(&out, "on_segments"), 24.0);
    assert!(out.starts_with("# A_neV = 121.517\n"));
    let train = fs::read_to_string(dir.path().join("swap_en.train")).unwrap();
    assert!(train.lines().last().unwrap() == "TOTAL 6400");
    assert!(train.contains("# f_GHz = "));
}

#[test]
fn merge_keeps_duration() {
    let dir = tempfile::tempdir().unwrap();
    let plain = stdout(&hydrospin(dir.path(), &["gate", "cnot"]));
    let merged = stdout(&hydrospin(dir.path(), &["gate", "cnot", "--merge"]));
    assert_eq!(num(&plain, "cycles"), num(&merged, "cycles"));
    assert!(num(&merged, "on_segments") <= num(&plain, "on_segments"));
    assert!((num(&plain, "avg_error") - num(&merged, "avg_error")).abs() < 1e-9);
}

#[test]
fn entangler_has_five_pulses() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&hydrospin(dir.path(), &["gate", "entangler"]));
    assert_eq!(value(&out, "pulses").split(" ; ").count(), 5);
}

#[test]
fn rot_needs_matrix() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hydrospin(dir.path(), &["gate", "rot"]).status.code(), Some(1));
    let x = ["gate", "rot", "--matrix", "0,0,1,0,1,0,0,0"];
    let o = hydrospin(dir.path(), &x);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(num(&stdout(&o), "avg_error") < 1e-5);
}

#[test]
fn run_swap_against_ideal() {
    let dir = tempfile::tempdir().unwrap();
    assert!(hydrospin(dir.path(), &["gate", "swap_en"]).status.success());
    let o = hydrospin(dir.path(), &["run", "swap_en.train", "--state", "0", "--ideal", "swap_en"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(num(&out, "avg_error") <= 1e-6);
    assert!(num(&out, "sector_aligned_error") <= 1e-6);
}

#[test]
fn run_empty_train_echoes_input() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.train"), "CLOCK 11.28\nTOTAL 0\n").unwrap();
    let out = stdout(&hydrospin(dir.path(), &["run", "empty.train", "--state", "1,+"]));
    assert_eq!(
        value(&out, "qubit 0"),
        "alpha +0.000000000+0.000000000i beta +1.000000000+0.000000000i leakage 0.000e0"
    );
    assert!(value(&out, "qubit 1").starts_with("alpha +0.707106781+0.000000000i beta +0.707106781"));
}

#[test]
fn corrupt_total_fails_closed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.train"), "CLOCK 11.28\nSEG 10 A=-\nTOTAL 11\n").unwrap();
    let o = hydrospin(dir.path(), &["run", "bad.train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn sweep_hyperfine_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = hydrospin(dir.path(), &["sweep", "cnot", "A", "--out", "reports"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("\nparam,delta,avg_error,worst_error,leakage\n"));
    let last = out.lines().last().unwrap();
    let t: f64 = last.strip_prefix("THRESHOLD A ").unwrap().parse().unwrap();
    assert!((2e-4..2e-3).contains(&t), "{t}");
    assert_eq!(fs::read_to_string(dir.path().join("reports/sweep_cnot_A.csv")).unwrap(), out);
}

#[test]
fn init_exact_and_sampled() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&hydrospin(dir.path(), &["init"]));
    assert_eq!(value(&out, "yield_zero"), "0.500000");
    let out = stdout(&hydrospin(dir.path(), &["init", "--input", "zero"]));
    assert_eq!(value(&out, "yield_zero"), "1.000000");

    let args = ["init", "--trajectories", "10000", "--seed", "7"];
    let a = stdout(&hydrospin(dir.path(), &args));
    let b = stdout(&hydrospin(dir.path(), &args));
    assert_eq!(a, b);
    let sampled: Vec<f64> = value(&a, "sampled_yield_zero")
        .split(" +- ")
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((sampled[0] - 0.5).abs() <= 3.0 * sampled[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| hydrospin(dir.path(), args).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["gate", "toffoli"]), Some(1));
    assert_eq!(code(&["sweep", "cnot", "temperature"]), Some(1));
    assert_eq!(code(&["run", "x.train", "--state", "2"]), Some(2));
    assert_eq!(code(&["--override", "A_neV=lots", "gate", "cnot"]), Some(2));
    assert_eq!(code(&["--dt", "5", "gate", "cnot"]), Some(2));
    assert_eq!(code(&["--override", "n_electrons=1", "gate", "cnot"]), Some(2));
}

#[test]
fn config_file_and_overrides_reach_header() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("dev.cfg"), "n_sites = 1\nn_electrons = 1\n").unwrap();
    let o = hydrospin(dir.path(), &["--config", "dev.cfg", "--dt", "4", "gate", "swap_en"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(value(&out, "# n_sites ="), "1");
    assert_eq!(value(&out, "# dt_cycles ="), "4");
}

#[test]
fn check_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = hydrospin(dir.path(), &["check", "--id", "1", "--out", "."]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().last().unwrap().starts_with("[PASS] 1 "));
    assert_eq!(fs::read_to_string(dir.path().join("check.txt")).unwrap(), out);
}
