use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_maxmin-ee");

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in report"))
        .parse()
        .unwrap()
}

#[test]
fn solve_reports_eta_equal_to_min_ee() {
    let config = golden("small.toml");
    let out = run(&["solve", config.to_str().unwrap(), "--drop", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout(&out);
    assert!(report.contains("status: converged"));
    let (eta, min_ee) = (field(&report, "eta_final"), field(&report, "min_ee"));
    // |g(η)| ≤ 1e-4 with an overhead of at least 10 W.
    assert!((eta - min_ee).abs() <= 1e-5, "{eta} vs {min_ee}");
    assert_eq!(report.lines().filter(|l| l.starts_with(char::is_numeric)).count(), 2);
}

#[test]
fn trace_has_one_row_per_inner_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let config = golden("small.toml");
    for alg in ["maxmin_ee", "maxmin_rate"] {
        let out = run(&["solve", config.to_str().unwrap(), "--algorithm", alg, "--trace", trace.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        let inner = field(&stdout(&out), "inner_iterations") as usize;
        let text = std::fs::read_to_string(&trace).unwrap();
        assert_eq!(text.lines().count(), inner);
        for line in text.lines() {
            let rec: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(rec["tau"].is_f64() && rec["bs_powers"].is_array());
        }
    }
}

#[test]
fn missing_config_exits_with_two_and_names_the_path() {
    let out = run(&["solve", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/scenario.toml"));
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "K = 3\nM_tilde = 2\nN_tilde = 1\nbogus = 1\n").unwrap();
    let out = run(&["sweep", path.to_str().unwrap(), "--drops", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn iteration_cap_has_its_own_exit_code() {
    let config = golden("small.toml");
    let out = run(&["solve", config.to_str().unwrap(), "--max-outer", "1", "--max-inner", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("status: iteration_cap"));
}

#[test]
fn unknown_algorithm_is_rejected() {
    let config = golden("small.toml");
    let out = run(&["solve", config.to_str().unwrap(), "--algorithm", "greedy"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_drop_sweep_fills_all_four_rows() {
    let config = golden("small.toml");
    let out = run(&["sweep", config.to_str().unwrap(), "--snr-list", "5", "--drops", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (row, alg) in rows.iter().zip(["maxmin_ee", "maxmin_rate", "powermin_I", "powermin_II"]) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[..2], ["5", alg]);
        assert!(cols[2].parse::<f64>().unwrap() > 0.0);
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[5..], ["1", "0"]);
    }
}

#[test]
fn sweep_matches_golden_file_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let config = golden("small.toml");
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let out = run(&[
            "sweep",
            config.to_str().unwrap(),
            "--snr-list=-10,10",
            "--drops",
            "2",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], std::fs::read(golden("sweep_small.csv")).unwrap());
}

#[test]
fn seed_override_changes_the_drops() {
    let config = golden("small.toml");
    let a = stdout(&run(&["generate", config.to_str().unwrap(), "--drop", "3"]));
    let b = stdout(&run(&["generate", config.to_str().unwrap(), "--drop", "3", "--seed", "8"]));
    let c = stdout(&run(&["generate", config.to_str().unwrap(), "--drop", "3", "--seed", "7"]));
    assert_ne!(a, b);
    assert_eq!(a, c);
    let drop: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(drop["drop_index"], 3);
    assert_eq!(drop["channels"].as_array().unwrap().len(), 2);
}

#[test]
fn identity_suite_reports_tiny_deviations() {
    let out = run(&["verify", "--suite", "identities", "--trials", "1000", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let line = text.lines().find(|l| l.contains("rate_equals_neg_ln_mmse")).unwrap();
    assert!(line.starts_with("PASS"));
    let worst: f64 = line
        .split_whitespace()
        .find_map(|w| w.strip_prefix("worst="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(worst < 1e-12, "{line}");
}

#[test]
fn oracle_and_monotonic_suites_pass() {
    for suite in ["oracle", "monotonic", "lemma1"] {
        let out = run(&["verify", "--suite", suite, "--trials", "30"]);
        let text = stdout(&out);
        assert_eq!(out.status.code(), Some(0), "{text}");
        assert!(text.lines().all(|l| l.starts_with("PASS ")));
    }
}
