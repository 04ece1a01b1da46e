//! End-to-end tests driving the compiled binary: exit codes, output shapes,
//! anchor values, config precedence, and byte-level reproducibility.

use std::path::PathBuf;
use std::process::{Command, Output};

use stripes_core::{e_tau, h_star, suite_names, ModelParams, PeriodicSet};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stripes"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Scratch file shared across the test binary's process.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stripes-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir.join(name)
}

fn write_set(name: &str, set: &PeriodicSet) -> PathBuf {
    let path = scratch(name);
    let mut file = std::fs::File::create(&path).expect("create set file");
    set.write_to(&mut file).expect("serialize set");
    path
}

fn stripes_1d(h: f64) -> PeriodicSet {
    PeriodicSet::from_boxes(1, 2.0 * h, &[(vec![0.0], vec![h])]).unwrap()
}

/// Two full stripe periods along axis 1, so any box-sized window straddles
/// boundaries and the orientation labels are unambiguous.
fn stripes_2d(h: f64) -> PeriodicSet {
    let l = 4.0 * h;
    let stripe = |lo: f64| (vec![lo, 0.0], vec![lo + h, l]);
    PeriodicSet::from_boxes(2, l, &[stripe(0.0), stripe(2.0 * h)]).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn period_table_hits_the_zero_tau_anchors() {
    let out = run(&["period-table", "--dim", "1", "--p", "3", "--tau-grid", "0,0.01,0.05", "--tol", "1e-12"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = csv_rows(&stdout(&out));
    assert_eq!(
        rows[0],
        vec!["tau", "box_l", "h_star", "e_star", "h_box", "e_box", "drift_times_l", "width_tol", "error"]
    );
    assert_eq!(rows.len(), 4);

    let get = |r: usize, c: usize| rows[r][c].parse::<f64>().unwrap();
    let anchor_h = 4.0 * std::f64::consts::LN_2;
    assert!((get(1, 2) - anchor_h).abs() < 1e-9, "h_star(0) = {}", rows[1][2]);
    assert!((get(1, 3) + 1.0 / (8.0 * std::f64::consts::LN_2)).abs() < 1e-11);
    // Default box is two optimal widths, so the constrained solve lands back
    // on the unconstrained optimum and the drift column collapses.
    assert!((get(1, 4) - anchor_h).abs() < 1e-8);
    assert!(get(1, 6).abs() < 1e-7);
    assert!((get(3, 2) - 2.683_071_683_270_771_9).abs() < 1e-6, "h_star(0.05) = {}", rows[3][2]);
    // Regularization shrinks the optimal width.
    assert!(get(1, 2) > get(2, 2) && get(2, 2) > get(3, 2));
    for r in 1..4 {
        assert!(rows[r][8].is_empty(), "unexpected error in row {r}: {}", rows[r][8]);
    }
}

#[test]
fn period_table_keeps_going_past_unsolvable_rows() {
    let out = run(&["period-table", "--dim", "1", "--p", "3", "--tau-grid", "0.05,-1"]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&stdout(&out));
    assert!(rows[1][8].is_empty());
    assert!(rows[2][2].is_empty(), "bad tau must leave h_star blank");
    assert!(!rows[2][8].is_empty(), "bad tau must carry an error message");
}

#[test]
fn energy_matches_the_width_series_on_stripes() {
    let params = ModelParams::new(1, 3.0, 0.05).unwrap();
    let h = 2.0;
    let set = stripes_1d(h);
    let path = write_set("stripes1d.txt", &set);
    let out = run(&["energy", "--set", path.to_str().unwrap(), "--tau", "0.05", "--p", "3"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();

    let total = v["direct"]["total"].as_f64().unwrap();
    assert!((total - e_tau(&params, h).unwrap()).abs() < 1e-8);
    assert!(v["gap_direct_minus_decomposed"].as_f64().unwrap().abs() < 1e-10);
    assert!(v["direct"]["error_bound"].as_f64().unwrap() >= 0.0);
    assert!(v["decomposed"]["error_bound"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["params"]["tau"].as_f64().unwrap(), 0.05);
}

#[test]
fn energy_rejects_zero_tau_and_contradictory_dim() {
    let path = write_set("stripes1d-guard.txt", &stripes_1d(2.0));
    let set = path.to_str().unwrap();

    let out = run(&["energy", "--set", set, "--tau", "0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("tau"), "stderr: {}", stderr(&out));

    let out = run(&["energy", "--set", set, "--tau", "0.05", "--dim", "2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("contradicts"), "stderr: {}", stderr(&out));
}

#[test]
fn energy_of_the_empty_set_is_exactly_zero() {
    let empty = PeriodicSet::from_boxes(1, 10.0, &[]).unwrap();
    let path = write_set("empty.txt", &empty);
    let out = run(&["energy", "--set", path.to_str().unwrap(), "--tau", "0.05"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["direct"]["total"].as_f64().unwrap(), 0.0);
    assert_eq!(v["decomposed"]["total"].as_f64().unwrap(), 0.0);
}

#[test]
fn verify_lists_every_suite_and_rejects_unknown_names() {
    let out = run(&["verify", "list"]);
    assert_eq!(code(&out), 0);
    let listing = stdout(&out);
    assert!(listing.lines().any(|l| l == "all"));
    for name in suite_names() {
        assert!(listing.lines().any(|l| l == name), "missing {name} in listing");
    }

    let out = run(&["verify", "no-such-suite"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("no-such-suite"), "stderr: {err}");
    assert!(err.contains("stripe-equality"), "stderr should list names: {err}");
}

#[test]
fn verify_single_suite_passes_and_serializes() {
    let out = run(&["verify", "stripe-equality", "--seed", "7", "--format", "json"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["passed"].as_bool(), Some(true));
    let outcomes = v["outcomes"].as_array().unwrap();
    assert!(!outcomes.is_empty());
    for o in outcomes {
        assert!(o["margin"].as_f64().unwrap() >= 0.0);
        assert!(o["samples"].as_u64().unwrap() > 0);
    }
}

#[test]
fn verify_all_passes_on_the_default_seed() {
    let out = run(&["verify", "all"]);
    assert_eq!(code(&out), 0, "stdout: {}\nstderr: {}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("overall"));
    assert!(!text.contains("[FAIL]"), "failed checks:\n{text}");
    let passes = text.lines().filter(|l| l.starts_with("[PASS]")).count();
    assert!(passes >= suite_names().len(), "expected at least one line per suite:\n{text}");
}

#[test]
fn classify_labels_straight_stripes_uniformly() {
    let path = write_set("stripes2d.txt", &stripes_2d(2.0));
    let args =
        ["classify", "--set", path.to_str().unwrap(), "--cube-l", "4.0", "--eta", "1.0", "--delta", "0.3", "--grid-n", "16"];
    let out = run(&args);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows[0], vec!["z1", "z2", "label", "d1", "d2"]);
    assert!(rows.len() > 1);
    for row in &rows[1..] {
        assert_eq!(row[2], "1", "window at ({}, {}) not labelled stripe-along-axis-1", row[0], row[1]);
    }

    let again = run(&args);
    assert_eq!(out.stdout, again.stdout, "classify must be reproducible byte for byte");
}

#[test]
fn compare_ranks_optimal_stripes_first_and_reproduces_bytes() {
    let params = ModelParams::new(2, 4.0, 0.02).unwrap();
    let box_l = format!("{}", 2.0 * h_star(&params, 1e-10).unwrap().h);
    let args = ["compare", "--dim", "2", "--p", "4", "--tau", "0.02", "--box", &box_l, "--grid-n", "48"];
    let out = run(&args);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows[0], vec!["pattern", "energy", "volume_fraction", "energy_error_budget"]);
    assert!(rows[1][0].starts_with("stripes-optimal"), "winner was {}", rows[1][0]);
    let best: f64 = rows[1][1].parse().unwrap();
    assert!(best < -0.27, "optimal stripe energy {best}");
    for pair in rows[1..].windows(2) {
        let (a, b): (f64, f64) = (pair[0][1].parse().unwrap(), pair[1][1].parse().unwrap());
        assert!(a <= b, "rows must be sorted by energy");
    }

    let again = run(&args);
    assert_eq!(out.stdout, again.stdout, "compare must be reproducible byte for byte");
}

#[test]
fn config_supplies_defaults_and_flags_override_them() {
    let set = write_set("stripes1d-config.txt", &stripes_1d(2.0));
    let set = set.to_str().unwrap();
    let config = scratch("defaults.conf");
    std::fs::write(&config, "tau = 0\ngrid-n = 32 # comment survives\n").unwrap();
    let config = config.to_str().unwrap();

    // Config value alone: tau = 0 is rejected by the evaluator.
    let out = run(&["--config", config, "energy", "--set", set]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("tau"));

    // Flag beats config; the grid-n default still comes from the file.
    let out = run(&["--config", config, "energy", "--set", set, "--tau", "0.05"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["grid_n"].as_u64(), Some(32));

    let bad = scratch("bad.conf");
    std::fs::write(&bad, "grid_width = 9\n").unwrap();
    let out = run(&["--config", bad.to_str().unwrap(), "energy", "--set", set, "--tau", "0.05"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown key"), "stderr: {}", stderr(&out));
}

#[test]
fn thread_cap_env_is_honored_and_validated() {
    let set = write_set("stripes1d-threads.txt", &stripes_1d(2.0));
    let set = set.to_str().unwrap();

    let out = bin()
        .env("STRIPE_THREADS", "1")
        .args(["energy", "--set", set, "--tau", "0.05"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    for bad in ["abc", "0"] {
        let out = bin()
            .env("STRIPE_THREADS", bad)
            .args(["energy", "--set", set, "--tau", "0.05"])
            .output()
            .unwrap();
        assert_eq!(code(&out), 2, "STRIPE_THREADS={bad} must be rejected");
        assert!(stderr(&out).contains("STRIPE_THREADS"));
    }
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let args = ["period-table", "--dim", "1", "--p", "3", "--tau-grid", "0,0.05"];
    let to_stdout = run(&args);
    assert_eq!(code(&to_stdout), 0);

    let path = scratch("table.csv");
    let mut with_out: Vec<&str> = args.to_vec();
    let path_s = path.to_str().unwrap().to_string();
    with_out.extend(["--out", &path_s]);
    let out = run(&with_out);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), to_stdout.stdout);
}
