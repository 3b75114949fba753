use std::path::Path;
use std::process::{Command, Output};

fn insnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_insnav")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn simulate_writes_outputs_and_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration = 30\n");
    let out = dir.path().join("out");
    let res = insnav(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table = stdout(&res);
    assert!(table.contains("baseline [m]"), "{table}");
    assert!(table.lines().any(|l| l.trim_start().starts_with("mean")), "{table}");
    for name in [
        "comparison.csv",
        "config.echo",
        "trace_accel.csv",
        "errors_baseline.csv",
        "data/imu.csv",
        "data/gnss.csv",
        "data/truth.csv",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    let echo = std::fs::read_to_string(out.join("config.echo")).unwrap();
    assert!(echo.lines().any(|l| l.replace(' ', "") == "seed=5"), "{echo}");
}

#[test]
fn single_variant_writes_only_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration = 20\n");
    let out = dir.path().join("out");
    let res = insnav(&[
        "batch",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--variant",
        "baseline",
        "--reps",
        "2",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("trace_baseline.csv").exists());
    assert!(!out.join("trace_accel.csv").exists());
}

#[test]
fn batch_runs_the_requested_repetitions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration = 20\nseed = 7\n");
    let out = dir.path().join("out");
    let res = insnav(&[
        "batch",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--reps",
        "3",
        "--profile",
        "racetrack",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let seeds: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds, ["7", "8", "9", ""]);
    let echo = std::fs::read_to_string(out.join("config.echo")).unwrap();
    assert!(echo.contains("racetrack"));
}

#[test]
fn replay_reads_an_exported_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration = 30\n");
    let sim_out = dir.path().join("sim");
    assert!(
        insnav(&["simulate", "--config", &cfg, "--out", sim_out.to_str().unwrap()])
            .status
            .success()
    );
    let replay_cfg = write_config(
        dir.path(),
        "duration = 30\ninit = first_fix\ninit_velocity = 5, 0, 0\np0_position_var = 4\np0_velocity_var = 1\np0_attitude_var = 0.01\n",
    );
    let out = dir.path().join("replay");
    let data = sim_out.join("data");
    let res = insnav(&[
        "replay",
        "--config",
        &replay_cfg,
        "--dataset",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("errors_accel.csv").exists());
}

#[test]
fn validation_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write_config(dir.path(), "speeed = 3\n");
    let res = insnav(&["batch", "--config", &bad, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("speeed"));

    let missing = insnav(&["replay", "--out", out.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));

    let bad_variant = insnav(&["simulate", "--variant", "fancy"]);
    assert_eq!(bad_variant.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_code_1_and_name_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration = 20\ninit = config\ninit_lat_deg = 10\n");
    let out = dir.path().join("out");
    let res = insnav(&[
        "batch",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "40",
        "--reps",
        "1",
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("40"));
}
