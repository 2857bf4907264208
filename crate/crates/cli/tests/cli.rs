use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tankstab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn summary(dir: &Path, name: &str) -> Value {
    let text = fs::read_to_string(dir.join(format!("{name}_summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn csv_column(path: &Path, col: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let k = r.headers().unwrap().iter().position(|h| h == col).unwrap();
    r.records().map(|rec| rec.unwrap()[k].parse().unwrap()).collect()
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# test\ngamma = 0.05\ngama = 0.1\n").unwrap();
    let o = run(&["spectrum", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`gama`"));
    let o = run(&["spectrum", "-s", "n_modes=abc"]);
    assert_eq!(code(&o), 2);
    let o = run(&["spectrum", "-s", "grid_points=8"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "gamma = 0.05\nn_modes = 3\nformat = json\n").unwrap();
    let out = dir.path().join("o");
    let o = run(&["spectrum", "-c", cfg.to_str().unwrap(), "-s", "gamma=0", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = summary(&out, "spectrum");
    assert_eq!(s["config"]["gamma"], 0.0);
    assert_eq!(s["config"]["n_modes"], 3);
    assert!(out.join("spectrum_conservative.json").exists());
}

#[test]
fn unperturbed_spectrum_has_no_drift() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "-s", "gamma=0", "-s", "n_modes=8", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for f in ["spectrum_conservative.csv", "spectrum_damped.csv"] {
        assert!(csv_column(&dir.path().join(f), "drift").iter().all(|d| d.abs() < 1e-9));
    }
    let s = summary(dir.path(), "spectrum");
    assert_eq!(s["pass"], true);
    assert!(s["tolerances"].as_array().unwrap().iter().any(|t| t["name"] == "unperturbed_match"));
}

#[test]
fn csv_floats_carry_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    run(&["spectrum", "-s", "n_modes=2", "-o", dir.path().to_str().unwrap()]);
    let text = fs::read_to_string(dir.path().join("spectrum_conservative.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    for cell in row.split(',').skip(1) {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
    }
}

#[test]
fn controllability_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["controllability", "-s", "gamma=0", "-s", "n_modes=6", "-o", out]);
    assert_eq!(code(&o), 0);
    let s = summary(dir.path(), "controllability");
    let unc: Vec<i64> = s["data"]["uncontrollable"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect();
    assert_eq!(unc, vec![-6, -4, -2, 2, 4, 6]);

    assert_eq!(code(&run(&["controllability", "-s", "n_modes=6", "-o", out])), 0);
    assert_eq!(summary(dir.path(), "controllability")["pass"], true);

    let o = run(&["controllability", "-s", "gamma=-0.05", "-o", out]);
    assert_eq!(code(&o), 3);
    let o = run(&["controllability", "-s", "system=target", "-o", out]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu > 3/L"));
}

#[test]
fn synthesis_regime_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [["gamma=0.45", "nu=0.5"], ["gamma=0", "nu=0.5"], ["gamma=0.05", "nu=1.5"]] {
        let o = run(&["feedback", "-s", args[0], "-s", args[1], "-o", out]);
        assert_eq!(code(&o), 3, "{args:?}");
    }
    let o = run(&["lyapunov", "-s", "gamma=0.45", "-o", out]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma_s"));
}

#[test]
fn simulate_is_deterministic_and_reads_tables() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let fb = dir.path().join("fb");
    let common = ["-s", "n_modes=6", "-s", "t_final=2", "-s", "seed=9"];
    let with = |extra: &[&str], out: &Path| {
        let mut args = vec!["simulate"];
        args.extend_from_slice(&common);
        args.extend_from_slice(extra);
        args.extend_from_slice(&["-o", out.to_str().unwrap()]);
        run(&args)
    };
    assert_eq!(code(&with(&[], &a)), 0);
    let first = fs::read(a.join("trajectory.csv")).unwrap();
    let first_summary = fs::read(a.join("simulate_summary.json")).unwrap();
    assert_eq!(code(&with(&[], &a)), 0);
    assert_eq!(first, fs::read(a.join("trajectory.csv")).unwrap());
    assert_eq!(first_summary, fs::read(a.join("simulate_summary.json")).unwrap());

    let o = run(&["feedback", "-s", "n_modes=6", "-o", fb.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let table = fb.join("feedback.csv");
    let b = dir.path().join("b");
    let o = with(&["-s", &format!("feedback_table={}", table.display())], &b);
    assert_eq!(code(&o), 0);
    assert_eq!(first, fs::read(b.join("trajectory.csv")).unwrap());

    let o = with(&["-s", "seed=10"], &b);
    assert_eq!(code(&o), 0);
    assert_ne!(first, fs::read(b.join("trajectory.csv")).unwrap());

    let o = with(&["-s", "n_modes=5", "-s", &format!("feedback_table={}", table.display())], &b);
    assert_eq!(code(&o), 2);
}

#[test]
fn steer_and_lyapunov_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["steer", "-s", "n_modes=12", "-s", "target_mode=2", "-o", out]);
    assert_eq!(code(&o), 0);
    let s = summary(dir.path(), "steer");
    assert!(s["data"]["relative_error"].as_f64().unwrap() < 5e-2);
    assert_eq!(s["pass"], true);

    let o = run(&["lyapunov", "-s", "n_modes=10", "-o", out]);
    assert_eq!(code(&o), 0);
    let s = summary(dir.path(), "lyapunov");
    assert_eq!(s["data"]["feasible"], true);
    assert_eq!(s["data"]["lambda"], 1.0);
    assert_eq!(s["pass"], true);
}

#[test]
fn finite_demo_places_poles() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["finite-demo", "-s", "fd_dim=3", "-s", "fd_poles=-1,-2,-4", "-o", out]);
    assert_eq!(code(&o), 0);
    let re = csv_column(&dir.path().join("closed_loop_eigenvalues.csv"), "re");
    for (a, b) in re.iter().zip([-4.0, -2.0, -1.0]) {
        assert!((a - b).abs() < 1e-8);
    }
    assert_eq!(summary(dir.path(), "finite_demo")["pass"], true);
    assert_eq!(code(&run(&["finite-demo", "-s", "fd_dim=3", "-s", "fd_poles=-1", "-o", out])), 2);
    assert_eq!(code(&run(&["finite-demo", "-s", "fd_dim=13", "-o", out])), 2);
}

#[test]
fn report_exit_code_matches_its_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", "-o", dir.path().to_str().unwrap()]);
    let s = summary(dir.path(), "report");
    let criteria = s["data"]["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 12);
    let all = criteria.iter().all(|c| c["pass"] == true);
    assert_eq!(s["pass"], all);
    assert_eq!(code(&o), if all { 0 } else { 1 });
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")).count(), 24);
}
