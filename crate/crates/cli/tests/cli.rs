use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soliton-lab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn profile_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(dir.path(), &["profile", "--n", "2", "--a", "0", "--tmin", "-10", "--tmax", "200", "--count", "4096"]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let csv = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,phi,phi1,phi2,phi3,residual"));
    assert_eq!(lines.count(), 4096);
    let report = json(&dir.path().join("profile_report.json"));
    assert_eq!(report["passed"], Value::Bool(true));
    assert!(report["residual_max"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn invalid_profile_parameters_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(dir.path(), &["profile", "--n", "1"]);
    assert_eq!(code(&output), 1);
    assert!(stderr(&output).contains("dimension n must be at least 2"), "{}", stderr(&output));
    let output = run(dir.path(), &["profile", "--a", "-0.5"]);
    assert_eq!(code(&output), 1);
    assert!(stderr(&output).contains("a >= 0"), "{}", stderr(&output));
    let output = run(dir.path(), &["profile", "--count", "2"]);
    assert_eq!(code(&output), 1);
}

#[test]
fn verify_passes_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(dir.path(), &["verify"]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let report = json(&dir.path().join("verify_report.json"));
    assert_eq!(report["failed"], Value::Array(vec![]));
    assert!(dir.path().join("geometry.csv").exists());
}

#[test]
fn tampered_profile_names_the_violated_bound() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("profile.csv");
    let output = run(dir.path(), &["profile", "--tmax", "10000", "--count", "16384"]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let verified = run(dir.path(), &["verify", "--profile", csv.to_str().unwrap()]);
    assert_eq!(code(&verified), 0, "{}", stderr(&verified));

    // clip φ′ from above at n on the far half of the grid
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let half = lines.len() / 2;
    for line in &mut lines[half..] {
        let mut fields: Vec<String> = line.split(',').map(str::to_string).collect();
        fields[2] = "2.0".into();
        *line = fields.join(",");
    }
    let tampered = dir.path().join("tampered.csv");
    std::fs::write(&tampered, lines.join("\n") + "\n").unwrap();
    let output = run(dir.path(), &["verify", "--profile", tampered.to_str().unwrap()]);
    assert_eq!(code(&output), 3, "{}", stderr(&output));
    assert!(stderr(&output).contains("phi1 < n"), "{}", stderr(&output));
}

#[test]
fn irregular_profile_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "t,phi,phi1,phi2,phi3,residual\n0,1,1,0,0,0\n1,2,1,0,0,0\n3,3,1,0,0,0\n").unwrap();
    let output = run(dir.path(), &["verify", "--profile", csv.to_str().unwrap()]);
    assert_eq!(code(&output), 1);
    assert!(stderr(&output).contains("uniform grid"), "{}", stderr(&output));
}

#[test]
fn short_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(dir.path(), &["verify", "--tmax", "50", "--count", "256"]);
    assert_eq!(code(&output), 1);
    assert!(stderr(&output).contains("insufficient range"), "{}", stderr(&output));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn modes_write_one_csv_per_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cone = write(dir.path(), "cone.json", r#"{"n": 2, "a": 0, "link_spectrum": [0, 8, 80]}"#);
    let batch = write(
        dir.path(),
        "modes.json",
        r#"[{"lambda": 8, "beta": 0.5, "Q": "power:0.5", "tmax": 200, "count": 2048},
            {"lambda": 0, "beta": 0.5, "Q": "power:0:0.7", "tmax": 50, "count": 501}]"#,
    );
    let output = run(dir.path(), &["modes", "--spec", &cone, "--batch", &batch]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let summary = json(&dir.path().join("modes_summary.json"));
    let entries = summary.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["branch"], "Backward");
    assert_eq!(entries[1]["branch"], "Forward");
    assert!((entries[0]["fitted_C"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    for (i, rows) in [(0, 2048), (1, 501)] {
        let csv = std::fs::read_to_string(dir.path().join(format!("modes/mode_{i:03}.csv"))).unwrap();
        assert!(csv.starts_with("t,u,residual\n"));
        assert_eq!(csv.lines().count(), rows + 1);
    }
}

#[test]
fn empty_batch_gives_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cone = write(dir.path(), "cone.json", r#"{"n": 2}"#);
    let batch = write(dir.path(), "modes.json", "[]");
    let output = run(dir.path(), &["modes", "--spec", &cone, "--batch", &batch]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    assert_eq!(json(&dir.path().join("modes_summary.json")), Value::Array(vec![]));
}

#[test]
fn critical_exponent_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    // n = 3, λ = 9, β = 1/4 gives 1 − β − λ/(4n) = 0
    let cone = write(dir.path(), "cone.json", r#"{"n": 3, "link_spectrum": [0, 9]}"#);
    let batch = write(dir.path(), "modes.json", r#"[{"lambda": 9, "beta": 0.25, "Q": "power:0.5"}]"#);
    let output = run(dir.path(), &["modes", "--spec", &cone, "--batch", &batch]);
    assert_eq!(code(&output), 2, "{}", stderr(&output));
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cone = write(dir.path(), "cone.json", r#"{"n": 2, "colour": "blue"}"#);
    let batch = write(dir.path(), "modes.json", "[]");
    let output = run(dir.path(), &["modes", "--spec", &cone, "--batch", &batch]);
    assert_eq!(code(&output), 1);
    assert!(stderr(&output).contains("colour"), "{}", stderr(&output));
    let problem = write(
        dir.path(),
        "bump.json",
        r#"{"n": 2, "grid": {"tmin": 0.5, "tmax": 60, "count": 512}, "F": {"kind": "bump", "amplitude": 0.1, "support": [5, 8]}, "stpes": 3}"#,
    );
    let output = run(dir.path(), &["solve-ma", "--problem", &problem]);
    assert_eq!(code(&output), 1);
}

#[test]
fn solve_ma_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(
        dir.path(),
        "bump.json",
        r#"{"n": 2, "a": 0, "grid": {"tmin": 0.5, "tmax": 60, "count": 2048},
            "F": {"kind": "bump", "amplitude": 0.1, "support": [5, 8]}, "steps": 20}"#,
    );
    let output = run(dir.path(), &["solve-ma", "--problem", &problem]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let trace = json(&dir.path().join("ma_trace.json"));
    let steps = trace["steps"].as_array().unwrap();
    assert_eq!(steps.last().unwrap()["s"].as_f64(), Some(1.0));
    let checks = json(&dir.path().join("ma_checks.json"));
    assert!(checks["residual_max"].as_f64().unwrap() <= 1e-9);
    assert!(checks["checks"].as_array().unwrap().iter().all(|c| c["passed"] == Value::Bool(true)));
}

#[test]
fn support_outside_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(
        dir.path(),
        "bump.json",
        r#"{"n": 2, "grid": {"tmin": 0.5, "tmax": 20, "count": 256},
            "F": {"kind": "bump", "amplitude": 0.1, "support": [15, 25]}}"#,
    );
    let output = run(dir.path(), &["solve-ma", "--problem", &problem]);
    assert_eq!(code(&output), 1, "{}", stderr(&output));
}

#[test]
fn poincare_and_energies_pass_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(dir.path(), &["poincare", "--n", "3"]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let report = json(&dir.path().join("poincare.json"));
    assert!(report["report"]["gap"].as_f64().unwrap() >= 1.2);
    let output = run(dir.path(), &["energies"]);
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    let energies = json(&dir.path().join("energies.json"));
    assert!(energies["report"]["i_minus_j"].as_f64().unwrap() >= 0.0);
}

#[test]
fn out_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let output = Command::new(env!("CARGO_BIN_EXE_soliton-lab"))
        .env("SOLITON_LAB_OUT", &target)
        .args(["profile", "--tmax", "20", "--count", "64"])
        .output()
        .unwrap();
    assert_eq!(code(&output), 0, "{}", stderr(&output));
    assert!(target.join("profile.csv").exists());
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cone = write(dir.path(), "cone.json", r#"{"n": 2, "link_spectrum": [0, 8, 80]}"#);
    let batch = write(
        dir.path(),
        "modes.json",
        r#"[{"lambda": 8, "beta": 0.5, "Q": "power:0.5", "count": 1001},
            {"lambda": 80, "beta": 0.6, "Q": "power:0.6", "count": 1001},
            {"lambda": 0, "beta": 0.3, "Q": "power:0.1", "count": 1001}]"#,
    );
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    assert_eq!(code(&run(&one, &["--threads", "1", "modes", "--spec", &cone, "--batch", &batch])), 0);
    assert_eq!(code(&run(&four, &["--threads", "4", "modes", "--spec", &cone, "--batch", &batch])), 0);
    for name in ["modes_summary.json", "modes/mode_000.csv", "modes/mode_001.csv", "modes/mode_002.csv"] {
        assert_eq!(std::fs::read(one.join(name)).unwrap(), std::fs::read(four.join(name)).unwrap(), "{name}");
    }
}
