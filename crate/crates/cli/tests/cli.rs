use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dragreg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dragreg"))
        .args(args)
        .current_dir(dir)
        .env_remove("DRAGREG_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn learn_writes_labeled_gains_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let first = dragreg(&["learn", "--out", "a"], dir.path());
    assert!(first.status.success(), "{}", stderr(&first));
    let second = dragreg(&["learn", "--out", "b"], dir.path());
    assert!(second.status.success());

    let gains = fs::read_to_string(dir.path().join("a/gains.txt")).unwrap();
    assert!(gains.starts_with("[K] 3 6\n"));
    assert!(gains.contains("\n[L] 3 8\n"));
    assert!(gains.contains("\n[P] 6 6\n"));
    assert_eq!(gains, fs::read_to_string(dir.path().join("b/gains.txt")).unwrap());
    let trace = fs::read_to_string(dir.path().join("a/vi_trace.csv")).unwrap();
    assert!(trace.starts_with("k,metric,reset\n"));
}

#[test]
fn compare_with_supplied_gains_emits_two_trajectories_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dragreg(&["learn", "--out", "learned"], dir.path()).status.success());
    let out = dragreg(
        &["compare", "--gains", "learned/gains.txt", "--out", "cmp"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let mut files: Vec<_> = fs::read_dir(dir.path().join("cmp"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["lqr.csv", "summary.csv", "vi.csv"]);

    let vi = fs::read_to_string(dir.path().join("cmp/vi.csv")).unwrap();
    let header = vi.lines().next().unwrap();
    assert_eq!(
        header,
        "t_s,x_km,y_km,z_km,xdot_kms,ydot_kms,zdot_kms,u1,u2,u3,e1_km,e2_km,e3_km"
    );
    assert!(vi.lines().nth(1).unwrap().split(',').count() == 13);
    let summary = fs::read_to_string(dir.path().join("cmp/summary.csv")).unwrap();
    let rows: Vec<_> = summary.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("vi,") && rows[2].starts_with("lqr,"));
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dragreg"))
        .args(["learn"])
        .current_dir(dir.path())
        .env("DRAGREG_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("from-env/gains.txt").exists());
}

#[test]
fn noise_free_run_exits_with_rank_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("quiet.toml"), "[noise]\namplitude = 0.0\n").unwrap();
    let out = dragreg(&["learn", "--config", "quiet.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("rank deficient"));
    assert!(!dir.path().join("o/gains.txt").exists());
}

#[test]
fn invalid_configuration_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[timing]\nrho = 50\nlearn_end_periods = 50.0\n").unwrap();
    let out = dragreg(&["learn", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("87"), "{msg}");
    assert!(msg.contains("learn_end_periods"), "{msg}");

    fs::write(dir.path().join("typo.toml"), "[timing]\nrhoo = 120\n").unwrap();
    let out = dragreg(&["learn", "--config", "typo.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("parse error"));

    let out = dragreg(&["learn", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = dragreg(&["compare", "--gains", "missing.txt"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn vi_iteration_cap_exits_with_convergence_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("short.toml"), "[vi]\nmax_iter = 3\n").unwrap();
    let out = dragreg(&["learn", "--config", "short.toml"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn defaults_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dragreg(&["defaults"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rho = 120"));
    let parsed = dragreg::config::ScenarioConfig::from_toml_str(&text, "stdout").unwrap();
    assert_eq!(parsed, dragreg::config::ScenarioConfig::default());
}
