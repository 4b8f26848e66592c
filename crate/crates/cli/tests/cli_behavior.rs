//! End-to-end tests of the binary: exit codes, file layout, reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perifront"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const CONSTANT_ENV: &str = "[env]\nperiod = 1.0\ng = \"1\"\n";
const SINE_ENV: &str = "[env]\nperiod = 1.0\ng = \"1 + 0.5*sin(2*pi*x)\"\n";
const LAZY_BRW: &str = "[brw]\np_left = [0.25]\np_stay = [0.5]\np_right = [0.25]\n";

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn eigen_reports_the_classical_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env.toml", CONSTANT_ENV);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "eigen",
        "--config",
        &cfg,
        "--lambda-grid",
        "1.0:2.0:0.5",
        "--n-grid",
        "256",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let fp = json_file(&out_dir.join("front_params.json"));
    let lambda = fp["lambda_star"].as_f64().unwrap();
    assert!((lambda - 2f64.sqrt()).abs() < 1e-6, "lambda_star = {lambda}");

    let gamma = fs::read_to_string(out_dir.join("gamma.csv")).unwrap();
    let mut lines = gamma.lines();
    assert_eq!(lines.next(), Some("lambda,gamma,gamma_over_lambda,residual"));
    assert_eq!(lines.count(), 3, "0.5-step grid over [1, 2]");

    let manifest = json_file(&out_dir.join("manifest.json"));
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(outputs.contains(&"gamma.csv") && outputs.contains(&"manifest.json"));
}

#[test]
fn eigen_handles_lattice_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "walk.toml", LAZY_BRW);
    let out_dir = tmp.path().join("out");
    let out = run(&["eigen", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let fp = json_file(&out_dir.join("front_params.json"));
    let lambda = fp["lambda_star"].as_f64().unwrap();
    assert!((lambda - 2.090456507).abs() < 1e-6, "lattice lambda_star = {lambda}");
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let out = run(&["eigen", "--config", "/no/such/file.toml", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/no/such/file.toml"));
}

#[test]
fn unknown_suite_name_is_a_usage_error() {
    let out = run(&["verify", "weekly"]);
    assert_eq!(out.status.code(), Some(2));
}

fn gamma_column(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn gamma_sweep_is_grid_converged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env.toml", SINE_ENV);
    for n in ["1024", "2048"] {
        let out_dir = tmp.path().join(n);
        let out = run(&[
            "eigen",
            "--config",
            &cfg,
            "--lambda-grid",
            "0.5:2.0:0.5",
            "--n-grid",
            n,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    }
    let coarse = gamma_column(&tmp.path().join("1024/gamma.csv"));
    let fine = gamma_column(&tmp.path().join("2048/gamma.csv"));
    assert_eq!(coarse.len(), fine.len());
    for (a, b) in coarse.iter().zip(&fine) {
        assert!((a - b).abs() < 1e-6, "gamma moved {a} -> {b} under refinement");
    }
}

#[test]
fn zero_trials_yields_header_only_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env.toml", CONSTANT_ENV);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        &cfg,
        "--model",
        "bbm",
        "--t",
        "2",
        "--trials",
        "0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(out_dir.join("samples.csv")).unwrap();
    assert_eq!(csv, "trial,t,M_t,centered,pruned_count\n");
}

#[test]
fn equal_seeds_reproduce_samples_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env.toml", CONSTANT_ENV);
    let mut bytes = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = tmp.path().join(sub);
        let out = run(&[
            "simulate",
            "--config",
            &cfg,
            "--t",
            "2",
            "--trials",
            "40",
            "--seed",
            "7",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        bytes.push(fs::read(out_dir.join("samples.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert!(bytes[0].len() > 100, "forty rows should have been written");
}

#[test]
fn manifest_rerun_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env.toml", CONSTANT_ENV);
    let first = tmp.path().join("first");
    let out = run(&[
        "simulate",
        "--config",
        &cfg,
        "--t",
        "2",
        "--trials",
        "30",
        "--seed",
        "11",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    // Delete the config to prove the manifest alone carries the run.
    fs::remove_file(&cfg).unwrap();
    let second = tmp.path().join("second");
    let manifest = first.join("manifest.json");
    let out = run(&[
        "simulate",
        "--from-manifest",
        manifest.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(
        fs::read(first.join("samples.csv")).unwrap(),
        fs::read(second.join("samples.csv")).unwrap()
    );
}

#[test]
fn simple_walk_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "walk.toml",
        "[brw]\np_left = [0.5]\np_stay = [0.0]\np_right = [0.5]\n",
    );
    let out = run(&[
        "simulate",
        "--config",
        &cfg,
        "--model",
        "brw",
        "--t",
        "20",
        "--trials",
        "10",
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("minimizer not attained"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn lattice_run_writes_integer_maxima_and_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "walk.toml",
        &format!("{LAZY_BRW}\n[simulate]\nmodel = \"brw\"\nt = 30\ntrials = 1\n"),
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        &cfg,
        "--trials",
        "25",
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(out_dir.join("samples.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 25, "flag should override trials = 1");
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[1], "30");
        fields[2].parse::<i64>().expect("lattice maximum is integral");
    }
}

#[test]
fn pde_rejects_nondivisible_dx() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env.toml", CONSTANT_ENV);
    let out = run(&[
        "pde",
        "--config",
        &cfg,
        "--dx",
        "0.3",
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("divide"), "stderr: {}", stderr(&out));
}

#[test]
fn pde_rejects_fit_range_beyond_horizon() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env.toml", CONSTANT_ENV);
    let out = run(&[
        "pde",
        "--config",
        &cfg,
        "--t-end",
        "10",
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("fit range outside solution"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn pde_front_speed_matches_the_classical_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env.toml", CONSTANT_ENV);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "pde",
        "--config",
        &cfg,
        "--t-end",
        "120",
        "--dx",
        "0.0625",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report = json_file(&out_dir.join("front.json"));
    let v = report["v_hat"].as_f64().unwrap();
    let target = 2f64.sqrt();
    assert!(
        (v - target).abs() / target < 5e-3,
        "v_hat = {v}, want about {target}"
    );
    let track = fs::read_to_string(out_dir.join("track.csv")).unwrap();
    assert!(track.starts_with("t,position\n"));
    assert!(track.lines().count() > 100);
}

#[test]
fn stats_tail_recovers_a_synthetic_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    // Exponential(2) via a small deterministic xorshift generator.
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut csv = String::from("centered\n");
    for _ in 0..20_000 {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let u = ((state >> 11) as f64 / (1u64 << 53) as f64).max(1e-16);
        csv.push_str(&format!("{}\n", -u.ln() / 2.0));
    }
    let input = tmp.path().join("samples.csv");
    fs::write(&input, csv).unwrap();

    let out_dir = tmp.path().join("out");
    let out = run(&[
        "stats",
        "tail",
        "--input",
        input.to_str().unwrap(),
        "--y-min",
        "0.2",
        "--y-max",
        "2.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let fit = json_file(&out_dir.join("fit.json"));
    let lambda = fit["lambda_hat"].as_f64().unwrap();
    assert!((lambda - 2.0).abs() / 2.0 < 0.1, "lambda_hat = {lambda}");
    assert!(out_dir.join("tail.csv").exists());
    assert!(stdout(&out).contains("lambda_hat"));
}

#[test]
fn stats_ks_is_zero_for_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("centered\n");
    for k in 0..500 {
        csv.push_str(&format!("{}\n", (k as f64).sin()));
    }
    let a = tmp.path().join("a.csv");
    fs::write(&a, &csv).unwrap();
    let out = run(&[
        "stats",
        "ks",
        "--a",
        a.to_str().unwrap(),
        "--b",
        a.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(report["ks_distance"].as_f64().unwrap(), 0.0);
    assert_eq!(report["n_a"].as_u64().unwrap(), 500);
}

#[test]
fn stats_times_yields_an_ascending_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env.toml", CONSTANT_ENV);
    let out = run(&[
        "stats",
        "times",
        "--config",
        &cfg,
        "--p",
        "0.25",
        "--t-min",
        "20",
        "--count",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let times: Vec<f64> = stdout(&out)
        .lines()
        .map(|l| l.trim().parse().unwrap())
        .collect();
    assert_eq!(times.len(), 5);
    assert!(times.windows(2).all(|w| w[0] < w[1]));
    assert!(times[0] > 20.0);
}

#[test]
fn verify_fast_passes_and_writes_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("report");
    let out = run(&["verify", "fast", "--out", out_dir.to_str().unwrap()]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "stdout: {text}\nstderr: {}", stderr(&out));
    assert!(text.contains("[ 1] PASS"), "stdout: {text}");
    assert!(text.contains("suite fast: PASS"), "stdout: {text}");

    let report = json_file(&out_dir.join("report.json"));
    assert_eq!(report["all_passed"].as_bool(), Some(true));
    assert_eq!(report["outcomes"].as_array().unwrap().len(), 6);
}

#[test]
fn verify_names_the_criterion_broken_by_an_override() {
    let tmp = tempfile::tempdir().unwrap();
    let overrides = tmp.path().join("envs");
    fs::create_dir(&overrides).unwrap();
    for name in ["constant", "sine", "drift"] {
        fs::write(overrides.join(format!("{name}.toml")), "period = \n").unwrap();
    }
    let out_dir = tmp.path().join("report");
    let out = run(&[
        "verify",
        "fast",
        "--config-dir",
        overrides.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("[ 1] FAIL"), "stdout: {text}");
    assert!(text.contains("constant.toml"), "stdout: {text}");

    let report = json_file(&out_dir.join("report.json"));
    assert_eq!(report["all_passed"].as_bool(), Some(false));
    for outcome in report["outcomes"].as_array().unwrap() {
        let id = outcome["id"].as_u64().unwrap();
        // Only the synthetic-sample check is independent of the environments.
        assert_eq!(outcome["passed"].as_bool(), Some(id == 13), "criterion {id}");
    }
}
