use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hyperwalk"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn polya_writes_mgf_and_derivative() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["polya"], r#"{"p": 0.75, "t_grid": [0, 0.5, 1], "seed": 1}"#);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("derivative at 0 = -0.5"));
    let csv = read(dir.path(), "polya.csv");
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    assert_eq!(lines.next().unwrap(), "t,estimate,ci_low,ci_high");
    let row: Vec<f64> = lines.nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[1] - (0.75 * (-0.5f64).exp() + 0.25 * 0.5f64.exp())).abs() < 1e-15);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "polya.json")).unwrap();
    assert_eq!(json["result"]["derivative_at_zero"], -0.5);
    assert_eq!(json["seed"], 1);
    assert_eq!(json["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn decay_of_point_mass_on_generator_is_zero() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"model": {"kind": "free_group", "rank": 2}, "mu": {"preset": "point_mass", "element": "a"},
        "seed": 3, "trials": 500, "c": 2, "n_grid": [1, 2, 4, 8]}"#;
    let o = run(dir.path(), &["decay"], config);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(dir.path(), "decay.csv");
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row.split(',').nth(1).unwrap(), "0");
    }
}

#[test]
fn verify_back_exhaustive_has_no_failures() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"model": {"kind": "free_group", "rank": 2, "delta": 0},
        "instances": {"mode": "exhaustive", "max_len": 6}, "d": 2, "seed": 0}"#;
    let o = run(dir.path(), &["verify-back"], config);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "verify_back.json")).unwrap();
    assert_eq!(json["result"]["failure_count"], 0);
    assert!(json["result"]["hypothesis_satisfying"].as_u64().unwrap() > 0);
}

#[test]
fn config_errors_exit_two_with_field_path() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["verify-all"], "");
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["drift"], r#"{"seed": 1, "trials": "many"}"#);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`trials`"), "{}", stderr(&o));
    let o = run(dir.path(), &["drift"], r#"{"model": {"kind": "sphere"}, "seed": 1}"#);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`model`"), "{}", stderr(&o));
    let o = run(dir.path(), &["drift"], r#"{"model": {"kind": "integer_line"}, "mu": {"preset": "polya", "p": 0.75}, "trials": 10, "n": 5}"#);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`seed`"), "{}", stderr(&o));
    let o = run(dir.path(), &["drift"], r#"{"seed": 1, "typo_field": 3}"#);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["shadow"], r#"{"model": {"kind": "integer_line"}, "mu": {"preset": "polya", "p": 0.75},
        "seed": 1, "trials": 10, "family": {"strategy": "ball_uniform", "radius": 4, "samples": 4},
        "d_grid": [], "n_grid": [1]}"#);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["no-such-command"], "{}");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_are_reproducible_and_seed_override_applies() {
    let config = r#"{"model": {"kind": "free_group", "rank": 2}, "mu": {"preset": "uniform_generators"},
        "seed": 11, "trials": 2000, "c": 4, "n_grid": [4, 8, 16, 32]}"#;
    let (a, b, c) = (TempDir::new().unwrap(), TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        assert_eq!(run(d.path(), &["decay"], config).status.code(), Some(0));
    }
    assert_eq!(read(a.path(), "decay.csv"), read(b.path(), "decay.csv"));
    assert_eq!(read(a.path(), "decay.json"), read(b.path(), "decay.json"));
    assert_eq!(run(c.path(), &["decay", "--seed", "12", "--trials", "1000"], config).status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&read(c.path(), "decay.json")).unwrap();
    assert_eq!(json["seed"], 12);
    assert_eq!(json["trials"], 1000);
    assert!(read(c.path(), "decay.csv").starts_with("# config_sha256="));
    assert!(read(c.path(), "decay.csv").lines().next().unwrap().ends_with("seed=12"));
}

#[test]
fn iterated_and_hierarchy_commands() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &["verify-prog"],
        r#"{"process": {"increments": [[1, 0.75], [-1, 0.25]], "horizon": 100}, "b": 0.5, "c": 0.1425, "seed": 0}"#,
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let o = run(
        dir.path(),
        &["verify-iter"],
        r#"{"process": {"increments": [[1, 0.75], [-1, 0.25]], "horizon": 100}, "a": 4, "lambda": 0.5, "seed": 0}"#,
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let o = run(
        dir.path(),
        &["verify-hierarchy"],
        r#"{"processes": [{"name": "biased", "increments": [[1, 0.75], [-1, 0.25]], "horizon": 120},
                          {"name": "fair", "increments": [[1, 0.5], [-1, 0.5]], "horizon": 120}], "seed": 0}"#,
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("fair.linear_progress = false"));
    // a failing premise is a verification failure
    let o = run(
        dir.path(),
        &["verify-prog"],
        r#"{"process": {"increments": [[1, 0.5], [-1, 0.5]], "horizon": 20}, "b": 0.5, "c": 0.1, "seed": 0}"#,
    );
    assert_eq!(o.status.code(), Some(1));
}

const LINE_CHAIN: &str = r#"{
  "model": {"kind": "integer_line"},
  "mu": {"preset": "polya", "p": 0.75},
  "seed": 7,
  "trials": 4000,
  "family": FAMILY,
  "d_grid": [2, 4, 6, 8],
  "n_grid": [4, 8, 16, 32],
  "k_grid": [8, 16],
  "mgf_n_grid": [16, 32],
  "t_grid": [0.05, 0.1, 0.2]
}"#;

fn failed_stage(dir: &Path) -> String {
    let json: serde_json::Value = serde_json::from_str(&read(dir, "verify_all.json")).unwrap();
    let result = &json["result"];
    let stages = result["stages"].as_array().unwrap();
    let failed = result["failed_stage"].as_str().unwrap().to_string();
    let at = stages.iter().position(|s| s["status"] == "fail").unwrap();
    assert!(stages[at + 1..].iter().all(|s| s["status"] == "skipped"));
    failed
}

#[test]
fn lineal_action_fails_the_chain() {
    let far = TempDir::new().unwrap();
    let config = LINE_CHAIN.replace("FAMILY", r#"{"strategy": "loxodromic_powers", "element": 1, "exponents": [1000]}"#);
    let o = run(far.path(), &["verify-all"], &config);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(failed_stage(far.path()), "shadow");

    let ball = TempDir::new().unwrap();
    let config = LINE_CHAIN.replace("FAMILY", r#"{"strategy": "ball_uniform", "radius": 8, "samples": 17}"#);
    let o = run(ball.path(), &["verify-all"], &config);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(failed_stage(ball.path()), "horofn_mgf");

    // decay itself still certifies directly
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &["decay"],
        r#"{"model": {"kind": "integer_line"}, "mu": {"preset": "polya", "p": 0.75}, "seed": 5, "trials": 4000,
            "c": 8, "n_grid": [16, 32, 64, 128]}"#,
    );
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "decay.json")).unwrap();
    assert!(json["result"]["fit"]["estimate"].as_f64().unwrap() > 0.0);
}

#[test]
fn estimator_subcommands_write_csv() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"model": {"kind": "free_group", "rank": 2}, "mu": {"preset": "uniform_generators"},
        "seed": 21, "trials": 1000, "family": {"strategy": "ball_uniform", "radius": 4, "samples": 12},
        "d_grid": [1, 2, 3], "n_grid": [4, 8], "t_grid": [0.05, 0.1], "a": 8, "b": 0.1, "d": 2, "k": 4, "n": 8,
        "progress_steps": 4}"#;
    for (cmd, file, header) in [
        ("shadow", "shadow.csv", "d,estimate,ci_low,ci_high"),
        ("horofn-mgf", "horofn_mgf.csv", "t,estimate,ci_low,ci_high"),
        ("progress-mgf", "progress_mgf.csv", "z,estimate,ci_low,ci_high"),
    ] {
        let o = run(dir.path(), &[cmd], config);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        assert_eq!(read(dir.path(), file).lines().nth(1).unwrap(), header, "{cmd}");
    }
    for cmd in ["drift", "uniform-shadow"] {
        let o = run(dir.path(), &[cmd], config);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}{}", stdout(&o), stderr(&o));
        assert!(!stdout(&o).is_empty());
    }
    // shallow shadows at short times are far above the 0.01 level, so the
    // conditional shadow bins fail
    let o = run(dir.path(), &["verify-horo"], config);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS horo_bounds"));
    assert!(stdout(&o).contains("FAIL mgf_estimate"));
}
