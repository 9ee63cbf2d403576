use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qfpt(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qfpt"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("QFPT_THREADS", t.to_string());
    }
    cmd.output().expect("spawn qfpt")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn run_ok(args: &[&str]) {
    let out = qfpt(args, None);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn identical_dynamics_give_unit_echo() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
k_max = 6
[system]
atom = { delta = 0.7, omega = 1.3, kappa = 1.1 }
[perturbed]
atom = { delta = 0.7, omega = 1.3, kappa = 1.1 }
"#,
    );
    let out = dir.path().join("out");
    run_ok(&["echo", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let rows = csv_rows(&out.join("echo.csv"));
    assert_eq!(rows.len(), 6);
    for row in rows {
        let eta: f64 = row[3].parse().unwrap();
        assert!((eta - 1.0).abs() < 1e-9, "{row:?}");
    }
    assert!(out.join("manifest.json").exists());
}

#[test]
fn classical_check_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    run_ok(&["classical-check", "--out", out.to_str().unwrap()]);
    let rows = csv_rows(&out.join("classical_check.csv"));
    assert!(!rows.is_empty());
    for row in rows {
        let diff: f64 = row[3].parse().unwrap();
        let k: f64 = row[0].parse().unwrap();
        let j: f64 = row[4].parse().unwrap();
        assert!(diff <= 1e-10, "{row:?}");
        assert!((j - k).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn stochastic_run_without_seed_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "n_traj = 10\n");
    let out = qfpt(
        &[
            "trajectories",
            "--config",
            &cfg,
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nntraj = 10\n");
    let out = qfpt(&["trajectories", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ntraj"));
}

#[test]
fn selftest_passes_and_catches_corruption() {
    let good = qfpt(&["selftest"], None);
    assert!(
        good.status.success(),
        "{}",
        String::from_utf8_lossy(&good.stdout)
    );
    let bad = qfpt(&["selftest", "--corrupt-vec-convention"], None);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("[FAIL]"));
}

#[test]
fn random_sweep_writes_one_row_per_draw() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[sweep]\nn = 200\n");
    let out = dir.path().join("out");
    run_ok(&[
        "sweep-random",
        "--config",
        &cfg,
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(csv_rows(&out.join("sweep_random.csv")).len(), 200);
    let svg = fs::read_to_string(out.join("fig4b.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        let out = dir.path().join(format!("t{threads}"));
        let o = out.to_str().unwrap();
        for exp in ["trajectories", "ancilla"] {
            let res = qfpt(
                &[exp, "--seed", "11", "--n-traj", "500", "--out", o],
                Some(threads),
            );
            assert!(
                res.status.success(),
                "{}",
                String::from_utf8_lossy(&res.stderr)
            );
        }
        outputs.push((
            fs::read(out.join("trajectories.csv")).unwrap(),
            fs::read(out.join("ancilla.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn strict_run_without_violations_succeeds() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    run_ok(&["tur-check", "--strict", "--out", out.to_str().unwrap()]);
    for row in csv_rows(&out.join("tur_check.csv")) {
        assert_eq!(row[6], "satisfied", "{row:?}");
    }
}
