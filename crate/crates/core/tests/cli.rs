//! End-to-end runs of the `esc-lab` binary: exit codes and emitted files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn esc_lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esc-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn linearize_quadratic_assigns_both_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = esc_lab(&["linearize", "--map", "quadratic", "--k", "1", "--omega-l", "0.001", "--a", "0.5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = read_json(&dir.path().join("linearization.json"));
    let eig_theta = json["nesc"]["eig_theta"].as_f64().unwrap();
    let eig_gamma = json["nesc"]["eig_gamma"].as_f64().unwrap();
    assert!((eig_theta + 1.0).abs() < 1e-12, "{eig_theta}");
    assert!((eig_gamma + 0.001).abs() < 1e-15, "{eig_gamma}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("eig_gamma = -1.0000000000000000e-3"), "{stdout}");
}

#[test]
fn equilibrium_reports_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = esc_lab(&["equilibrium", "--map", "paper-example", "--a", "0.5"], dir.path());
    assert!(out.status.success());
    let json = read_json(&dir.path().join("equilibrium.json"));
    assert!(json["residual"].as_f64().unwrap() < 1e-10);
    let theta = json["theta_bar_star"].as_f64().unwrap();
    assert!((theta + 0.051477738325605550).abs() < 1e-10, "{theta}");
    assert_eq!(json["bracket"][0].as_f64().unwrap(), -0.5);
}

#[test]
fn averaged_quadratic_converges_monotonically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
  "map": "quadratic",
  "coords": "avg",
  "params": { "a": 0.5, "omega": 10.0, "k": 1.0, "omega_l": 1.0 },
  "integration": { "dt": 0.01, "t_final": 20.0, "record_every": 1 },
  "initial_states": [[1.0, 1.0]]
}"#,
    );
    let out = esc_lab(&["simulate", "--config", &config], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut reader = csv::Reader::from_path(dir.path().join("ic0.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["t", "theta_bar", "gamma_bar"]);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2001);
    for w in rows.windows(2) {
        assert!(w[1][1].abs() <= w[0][1].abs());
        assert!((w[1][2] - 0.5).abs() <= (w[0][2] - 0.5).abs());
    }
    let last = rows.last().unwrap();
    assert!(last[1].abs() < 1e-8 && (last[2] - 0.5).abs() < 1e-8, "{last:?}");

    let summary = read_json(&dir.path().join("summary.json"));
    assert!((summary["gamma_star"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    assert!(summary["runs"][0]["domain_exit"].is_null());
}

#[test]
fn csv_floats_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
  "map": "paper-example",
  "params": { "a": 0.5, "omega": 10.0, "k": 0.001, "omega_l": 0.001 },
  "integration": { "t_final": 1.0 },
  "options": { "table": { "lo": -1.0, "hi": 1.0, "n": 5 } }
}"#,
    );
    let out = esc_lab(&["average-table", "--config", &config], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("average_table.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "theta,G_avg,H_avg,G_avg_prime,H_avg_prime,J_prime,J_second,H_lower_bound");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for field in rows.iter().flat_map(|r| r.split(',')) {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn domain_exit_gives_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    // A step far beyond the stability limit of the fast Riccati mode.
    let config = write_config(
        dir.path(),
        r#"{
  "map": "quadratic",
  "coords": "avg",
  "params": { "a": 0.5, "omega": 10.0, "k": 1.0, "omega_l": 1000.0 },
  "integration": { "dt": 0.01, "t_final": 1.0 },
  "initial_states": [[1.0, 1.0]]
}"#,
    );
    let out = esc_lab(&["simulate", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("summary.json"));
    assert!(summary["runs"][0]["domain_exit"]["t"].as_f64().unwrap() < 1.0);
}

#[test]
fn default_verify_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = esc_lab(&["verify"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let json = read_json(&dir.path().join("verify.json"));
    assert_eq!(json["all_pass"], Value::Bool(true));
    assert!(!String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn failed_verification_gives_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    // Without the excluded ball the origin is on the grid, where V = 0.
    let config = write_config(
        dir.path(),
        r#"{
  "map": "paper-example",
  "params": { "a": 0.5, "omega": 10.0, "k": 0.001, "omega_l": 0.001 },
  "integration": { "t_final": 1.0 },
  "options": {
    "lyapunov_grid": { "theta_range": [-1.0, 1.0], "gamma_range": [-1.0, 1.0], "n_theta": 5, "n_gamma": 5, "exclusion_radius": 0.0 },
    "verify": { "maps": ["quadratic"], "amplitudes": [0.5], "grid": { "lo": -1.0, "hi": 1.0, "n": 5 },
                "fd_points": 3, "consistency_states": 3, "seed": 7 }
  }
}"#,
    );
    let out = esc_lab(&["verify", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("FAIL lyapunov_positive"), "{stdout}");
}

#[test]
fn bad_config_gives_exit_code_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
  "map": "paper-example",
  "params": { "a": 0.5, "omega": "ten", "k": 0.001, "omega_l": 0.001 },
  "integration": { "t_final": 1.0 }
}"#,
    );
    let out = esc_lab(&["equilibrium", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("params") && stderr.contains("line 3"), "{stderr}");
}

#[test]
fn unknown_map_gives_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = esc_lab(&["equilibrium", "--map", "rosenbrock"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("rosenbrock"));
}

#[test]
fn flags_override_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
  "map": "paper-example",
  "params": { "a": 0.5, "omega": 10.0, "k": 0.001, "omega_l": 0.001 },
  "integration": { "t_final": 1.0 }
}"#,
    );
    let out = esc_lab(&["equilibrium", "--config", &config, "--map", "quadratic", "--a", "2"], dir.path());
    assert!(out.status.success());
    let json = read_json(&dir.path().join("equilibrium.json"));
    assert_eq!(json["map"], "quadratic");
    assert_eq!(json["a"].as_f64().unwrap(), 2.0);
    assert!(json["theta_bar_star"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn maps_lists_every_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let out = esc_lab(&["maps"], dir.path());
    assert!(out.status.success());
    let json = read_json(&dir.path().join("maps.json"));
    let names: Vec<&str> = json.as_array().unwrap().iter().map(|d| d["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 4);
    for name in ["paper-example", "quadratic", "quartic", "abs-smooth"] {
        assert!(names.contains(&name), "{names:?}");
    }
}
