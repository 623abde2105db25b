use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use qinv_cli::{run, EXIT_CERTIFICATE, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, EXIT_UNSTABLE};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qinv(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["qinv"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn params_json(l1: f64, l2: f64, mu: f64, nu: f64, p: f64, s: u32, b: u32) -> String {
    format!(
        r#"{{"params": {{"lambda1": {l1}, "lambda2": {l2}, "mu": {mu}, "nu": {nu}, "p": {p}, "s": {s}, "b": {b}}}}}"#
    )
}

fn base(dir: &Path) -> String {
    write_config(dir, "base.json", &params_json(1.0, 1.0, 4.0, 2.0, 0.5, 1, 2))
        .to_string_lossy()
        .into_owned()
}

#[test]
fn solve_happy_path_writes_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    let out = tmp.path().join("out");
    let o = qinv(&["solve", "--config", &cfg, "--trunc", "40", "40", "--out", out.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let dist = fs::read_to_string(out.join("distribution.csv")).unwrap();
    assert!(dist.starts_with("n1,n2,k,prob\n"));
    assert_eq!(dist.lines().count(), 41 * 41 * 3 + 1);
    assert!(out.join("balance.csv").exists());
    assert!(o.stderr.contains("PASS cut_priority_queue"), "{}", o.stderr);
    assert!(!o.stderr.contains("FAIL"));
}

#[test]
fn solve_json_echoes_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    let o = qinv(&["solve", "--config", &cfg, "--trunc", "5", "5", "--format", "json"]);
    assert_eq!(o.code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["params"]["mu"], 4.0);
    assert_eq!(v["trunc"]["cap1"], 5);
    assert!(v["residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["states"].as_array().unwrap().len(), 6 * 6 * 3);
}

#[test]
fn unstable_priority_only_admission_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "u.json", &params_json(2.0, 2.5, 4.0, 2.0, 1.0, 1, 2));
    let out = tmp.path().join("out");
    let o = qinv(&["solve", "--config", cfg.to_str().unwrap(), "--trunc", "5", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_UNSTABLE);
    assert!(o.stderr.contains("not ergodic"), "{}", o.stderr);
    assert!(!out.join("distribution.csv").exists());

    let o = qinv(&["solve", "--config", cfg.to_str().unwrap(), "--trunc", "5", "5", "--force"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stderr.contains("warning"));
}

#[test]
fn p_below_one_overload_only_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "w.json", &params_json(2.0, 2.5, 4.0, 2.0, 0.5, 1, 2));
    let o = qinv(&["solve", "--config", cfg.to_str().unwrap(), "--trunc", "5", "5"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stderr.contains("stability not established"));
}

#[test]
fn missing_key_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let kv = write_config(tmp.path(), "c.conf", "lambda1 = 1\nlambda2 = 1\nnu = 2\np = 0.5\ns = 1\nb = 2\n");
    let o = qinv(&["solve", "--config", kv.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_CONFIG);
    assert!(o.stderr.contains("`mu`"), "{}", o.stderr);

    let json = write_config(tmp.path(), "c.json", r#"{"params": {"lambda1": 1, "lambda2": 1, "mu": 4, "p": 0.5, "s": 1, "b": 2}}"#);
    let o = qinv(&["solve", "--config", json.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_CONFIG);
    assert!(o.stderr.contains("nu"), "{}", o.stderr);

    assert_eq!(qinv(&["solve"]).code, EXIT_CONFIG);
    assert_eq!(qinv(&["solve", "--config", "/nonexistent/x.json"]).code, EXIT_CONFIG);
    assert_eq!(qinv(&["solve", "--bogus"]).code, EXIT_CONFIG);
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.conf",
        "lambda1 = 1\nlambda2 = 1\nmu = 4\nnu = 2\np = 0.5\ns = 1\nb = 2\ntrunc.cap1 = 3\ntrunc.cap2 = 3\noutput.format = json\n",
    );
    let o = qinv(&["solve", "--config", cfg.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["trunc"]["cap1"], 3);
    let o = qinv(&["solve", "--config", cfg.to_str().unwrap(), "--trunc", "4", "2", "--format", "csv"]);
    assert_eq!(o.stdout.lines().count(), 5 * 3 * 3 + 1);
}

#[test]
fn drift_exit_codes_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    let o = qinv(&["drift", "--config", &cfg, "--trunc", "50", "50"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    assert!(v["eta"].as_f64().unwrap() > 0.0);

    let o = qinv(&["drift", "--config", &cfg, "--trunc", "50", "50", "--emit-csv"]);
    assert_eq!(o.code, EXIT_OK);
    let mut lines = o.stdout.lines();
    assert_eq!(lines.next(), Some("n1,n2,k,drift,in_F,violation"));
    assert_eq!(lines.count(), 51 * 51 * 3);

    let bad = write_config(tmp.path(), "bad.json", &params_json(2.0, 2.0, 4.0, 2.0, 0.5, 1, 2));
    let o = qinv(&["drift", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_CERTIFICATE);
    assert!(o.stderr.contains("certificate inapplicable"), "{}", o.stderr);
}

#[test]
fn simulate_is_byte_identical_and_has_intervals() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    let args = ["simulate", "--config", &cfg, "--seed", "11", "--events", "2e5", "--batches", "20"];
    let a = qinv(&args);
    let b = qinv(&args);
    assert_eq!(a.code, EXIT_OK, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(&a.stdout).unwrap();
    assert_eq!(v["events"], 200_000);
    let metrics = v["time_avg"].as_object().unwrap();
    assert!(metrics.len() >= 10);
    for (name, e) in metrics {
        assert!(e["half_width"].as_f64().is_some_and(|h| h.is_finite()), "{name}");
    }
    let c = qinv(&["simulate", "--config", &cfg, "--seed", "12", "--events", "2e5"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulate_against_solve_prints_z_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    let traj = tmp.path().join("traj.csv");
    let o = qinv(&[
        "simulate",
        "--config",
        &cfg,
        "--events",
        "100000",
        "--against-solve",
        "--trunc",
        "30",
        "30",
        "--trajectory",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let zs: Vec<&str> = o.stderr.lines().filter(|l| l.starts_with("z ")).collect();
    assert!(zs.iter().any(|l| l.contains("p_y_eq_0")));
    assert!(zs.iter().any(|l| l.contains("mean_x1")));
    let log = fs::read_to_string(traj).unwrap();
    assert!(log.starts_with("t,n1,n2,k,event\n"));
    assert_eq!(log.lines().count(), 100_001);
}

#[test]
fn instant_worked_example_and_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "i.json", &params_json(1.0, 1.0, 3.0, 1.0, 0.5, 1, 2));
    let o = qinv(&["instant", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK);
    let theta: Vec<f64> = o
        .stdout
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (g, w) in theta.iter().zip([0.5, 1.0 / 3.0, 1.0 / 6.0]) {
        assert!((g - w).abs() < 1e-15);
    }
    let good = write_config(tmp.path(), "good.csv", &o.stdout);
    let o = qinv(&["instant", "--config", cfg.to_str().unwrap(), "--check", good.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK);
    let bad = write_config(tmp.path(), "bad.csv", "k,theta\n0,0.4\n1,0.4\n2,0.2\n");
    let o = qinv(&["instant", "--config", cfg.to_str().unwrap(), "--check", bad.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_CHECK_FAILED);

    let o = qinv(&["instant", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["params"]["nu"], 1.0);
}

#[test]
fn verify_round_trips_a_solved_distribution() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    let o = qinv(&["solve", "--config", &cfg, "--trunc", "12", "12"]);
    let dist = write_config(tmp.path(), "dist.csv", &o.stdout);
    let v = qinv(&["verify", "--config", &cfg, "--dist", dist.to_str().unwrap()]);
    assert_eq!(v.code, EXIT_OK, "{}", v.stderr);
    let doc: serde_json::Value = serde_json::from_str(&v.stdout).unwrap();
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["trunc"]["cap2"], 12);

    // Moving mass between two states breaks global balance.
    let mut lines: Vec<String> = o.stdout.lines().map(String::from).collect();
    lines[1] = "0,0,0,0.2".into();
    let broken = write_config(tmp.path(), "broken.csv", &(lines.join("\n") + "\n"));
    let v = qinv(&["verify", "--config", &cfg, "--dist", broken.to_str().unwrap()]);
    assert_eq!(v.code, EXIT_CHECK_FAILED);

    let other_b = write_config(tmp.path(), "b3.json", &params_json(1.0, 1.0, 4.0, 2.0, 0.5, 1, 3));
    let v = qinv(&["verify", "--config", other_b.to_str().unwrap(), "--dist", dist.to_str().unwrap()]);
    assert_eq!(v.code, EXIT_CONFIG);
}

#[test]
fn verify_without_distribution_solves() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    let v = qinv(&["verify", "--config", &cfg, "--trunc", "20", "20"]);
    assert_eq!(v.code, EXIT_OK, "{}", v.stderr);
    let doc: serde_json::Value = serde_json::from_str(&v.stdout).unwrap();
    assert!(doc["drift"]["violations"].as_array().unwrap().is_empty());
}

fn rows_for(csv: &str, metric: &str) -> Vec<(f64, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[2] == metric)
        .map(|f| (f[1].parse().unwrap(), f[3].parse().unwrap()))
        .collect()
}

#[test]
fn sweep_p_gives_one_row_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    let o = qinv(&["sweep", "--config", &cfg, "--axis", "p", "--grid", "0,0.25,0.5,0.75,1", "--mode", "solve", "--trunc", "10", "10"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stdout.starts_with("axis,value,metric,estimate,half_width\n"));
    for metric in ["stable", "p_y_eq_0", "mean_x2", "boundary_mass"] {
        assert_eq!(rows_for(&o.stdout, metric).len(), 5, "{metric}");
    }
    let x2 = rows_for(&o.stdout, "mean_x2");
    assert!(x2.windows(2).all(|w| w[1].1 >= w[0].1), "{x2:?}");
}

#[test]
fn sweep_stability_flag_flips_at_boundary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "p1.json", &params_json(1.0, 1.0, 4.0, 2.0, 1.0, 1, 2));
    let grid = "2.5,2.9,2.999999,3,3.000001,3.5";
    let o = qinv(&["sweep", "--config", cfg.to_str().unwrap(), "--axis", "lambda2", "--grid", grid]);
    assert_eq!(o.code, EXIT_OK);
    let flags: Vec<f64> = rows_for(&o.stdout, "stable").into_iter().map(|r| r.1).collect();
    assert_eq!(flags, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    for mode in ["solve", "simulate", "instant"] {
        let mut args = vec!["sweep", "--config", &cfg, "--axis", "nu", "--grid", "0.5,1,2,4,8", "--mode", mode];
        args.extend(["--trunc", "8", "8", "--events", "20000", "--seed", "3"]);
        let one = qinv(&[args.clone(), vec!["--workers", "1"]].concat());
        let many = qinv(&[args, vec!["--workers", "4"]].concat());
        assert_eq!(one.code, EXIT_OK, "{}", one.stderr);
        assert_eq!(one.stdout, many.stdout, "{mode}");
    }
}

#[test]
fn sweep_rejects_invalid_grid_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base(tmp.path());
    let o = qinv(&["sweep", "--config", &cfg, "--axis", "p", "--grid", "0.5,1.5"]);
    assert_eq!(o.code, EXIT_CONFIG);
    assert!(o.stderr.contains("p"), "{}", o.stderr);
    let o = qinv(&["sweep", "--config", &cfg, "--grid", "1,2"]);
    assert_eq!(o.code, EXIT_CONFIG);
    assert!(o.stderr.contains("sweep.axis"));
}

#[test]
fn binary_reports_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "u.json", &params_json(2.0, 2.5, 4.0, 2.0, 1.0, 1, 2));
    let status = Command::new(env!("CARGO_BIN_EXE_qinv"))
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_UNSTABLE));
    let help = Command::new(env!("CARGO_BIN_EXE_qinv")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&help.stdout).contains("sweep"));
}
