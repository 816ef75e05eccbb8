use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn shipped(name: &str) -> PathBuf {
    repo_root().join("configs").join(name)
}

fn msent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msent"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn binary_cube_demo_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let config = shipped("tabular_binary3.json");
    let run = msent(&[
        "solve-tabular",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let golden =
        fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/tabular_binary3.json")).unwrap();
    assert_eq!(fs::read_to_string(&out).unwrap(), golden);
}

#[test]
fn shipped_solve_configs_verify() {
    for (cmd, name) in [
        ("solve-tabular", "tabular_binary3.json"),
        ("solve-tabular", "tabular_binary3_mt.json"),
        ("solve-gaussian", "gaussian_two_block.json"),
    ] {
        let report = json_stdout(&msent(&[cmd, "--config", shipped(name).to_str().unwrap()]));
        assert_eq!(report["verification"]["passed"], Value::Bool(true), "{name}");
        assert_eq!(report["msent_version"], "0.1.0");
        assert!(report["config"].is_object());
    }
}

#[test]
fn single_scale_schedule_returns_gibbs() {
    let dir = tempfile::tempdir().unwrap();
    let f = [0.3f64, -1.0, 0.0, 2.0];
    let q = [0.1f64, 0.2, 0.3, 0.4];
    let cfg = write(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"algorithm": "min-rel-entropy", "space": [2, 2], "f": {f:?}, "q": {q:?}, "lambda": 0.5, "sigma": [1.0, 0.0]}}"#
        ),
    );
    let report = json_stdout(&msent(&["solve-tabular", "--config", cfg.to_str().unwrap()]));
    let weights: Vec<f64> = f.iter().zip(&q).map(|(e, w)| w * (-e / 0.5f64).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs = floats(&report["solution"]["probs"]);
    for (p, w) in probs.iter().zip(&weights) {
        assert!((p - w / z).abs() < 1e-14);
    }
    assert!(report["verification"]["tv_distance"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn malformed_probabilities_fail_with_line_context() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        "{\n  \"algorithm\": \"mt\",\n  \"space\": [3],\n  \"f\": [0.0, 1.0, 2.0],\n  \"q\": [0.3, 0.3, 0.3],\n  \"lambda\": 1.0,\n  \"sigma\": [1.0]\n}\n",
    );
    let out = msent(&["solve-tabular", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:5"), "{err}");
    assert!(err.contains("sum to"), "{err}");

    let syntax = write(dir.path(), "syntax.json", "{\n  \"space\": [2,,]\n}\n");
    let out = msent(&["solve-tabular", "--config", syntax.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax.json:2:"));
}

#[test]
fn no_verify_skips_the_oracle() {
    let report = json_stdout(&msent(&[
        "solve-tabular",
        "--config",
        shipped("tabular_binary3.json").to_str().unwrap(),
        "--no-verify",
    ]));
    assert!(report["verification"].is_null());
}

#[test]
fn oracle_disagreement_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"algorithm": "max-entropy", "space": [3, 3], "f": [0, 1, 2, 3, 4, 5, 6, 7, 8], "lambda": 1.0,
            "sigma": [0.5, 0.5], "oracle": {"max_iterations": 2}}"#,
    );
    let out = msent(&["solve-tabular", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn experiment_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config = shipped("experiment_quick.json");
    let mut csvs = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("grid{workers}.csv"));
        let run = msent(&[
            "experiment",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        let summary = fs::read_to_string(dir.path().join(format!("grid{workers}.summary.csv"))).unwrap();
        csvs.push((fs::read_to_string(&out).unwrap(), summary));
    }
    assert_eq!(csvs[0], csvs[1]);
    let grid = &csvs[0].0;
    assert!(grid.starts_with("# msent 0.1.0\n# config {"));
    let rows: Vec<&str> = grid.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "alpha,sigma1,risk,risk_stderr");
    assert_eq!(rows.len(), 1 + 9);
    assert!(csvs[0].1.lines().any(|l| l == "alpha,best_sigma1,min_risk,risk_stderr"));
}

#[test]
fn seed_flag_changes_the_sweep_and_is_recorded() {
    let config = shipped("experiment_quick.json");
    let a = msent(&["experiment", "--config", config.to_str().unwrap()]);
    let b = msent(&["experiment", "--config", config.to_str().unwrap(), "--seed", "99"]);
    let (a, b) = (
        String::from_utf8(a.stdout).unwrap(),
        String::from_utf8(b.stdout).unwrap(),
    );
    assert_ne!(a, b);
    assert!(b.contains("\"seed\":99"));
}

#[test]
fn zero_alpha_grid_reproduces_single_scale_rows() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(shipped("experiment_quick.json")).unwrap();
    let only_zero = base.replace("\"alphas\": [0.0, 0.5, 0.9]", "\"alphas\": [0.0]");
    assert_ne!(base, only_zero);
    let cfg = write(dir.path(), "zero.json", &only_zero);
    let (full, zero) = (dir.path().join("full.csv"), dir.path().join("zero.csv"));
    for (c, o) in [(shipped("experiment_quick.json"), &full), (cfg, &zero)] {
        assert!(msent(&[
            "experiment",
            "--config",
            c.to_str().unwrap(),
            "--out",
            o.to_str().unwrap()
        ])
        .status
        .success());
    }
    let data = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#') && l.starts_with("0.00000000e0"))
            .map(String::from)
            .collect()
    };
    assert_eq!(data(&full).len(), 3);
    assert_eq!(data(&full), data(&zero));
}

#[test]
fn bounds_single_layer_has_no_gain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.json",
        r#"{"input_bound": 1.0, "n": 10, "reference": {"dirac": {"log_inv_q": [2.5]}}}"#,
    );
    let report = json_stdout(&msent(&["bounds", "--config", cfg.to_str().unwrap()]));
    let r = &report["report"];
    assert_eq!(r["excess_single"], r["excess_multiscale"]);
    assert_eq!(r["improvement"].as_f64().unwrap(), 0.0);
}

#[test]
fn bounds_teacher_student_reports_exact_and_approx() {
    let report = json_stdout(&msent(&[
        "bounds",
        "--config",
        shipped("bounds_teacher_dirac.json").to_str().unwrap(),
    ]));
    let ts = &report["report"]["teacher_student"];
    let exact = ts["exact"].as_f64().unwrap();
    let approx = ts["approx"].as_f64().unwrap();
    let direct = 40.0 * 20f64.sqrt() - (1..=20).map(|j| (j as f64).sqrt()).sum::<f64>();
    assert!((exact - direct).abs() < 1e-9);
    assert!((approx - exact).abs() / exact < 0.2);
    let dpg_sum: f64 = floats(&report["report"]["dpg"]).iter().sum();
    assert!((dpg_sum - exact).abs() < 1e-9);
    assert!(report["report"]["constant_note"].as_str().unwrap().contains("2(eR)^2"));
}

#[test]
fn bounds_gaussian_teacher_reference() {
    let report = json_stdout(&msent(&[
        "bounds",
        "--config",
        shipped("bounds_teacher_gaussian.json").to_str().unwrap(),
    ]));
    let r = &report["report"];
    let ds = floats(&r["divergences"]);
    assert_eq!(ds.len(), 4);
    assert!(ds.windows(2).all(|w| w[0] >= w[1]));
    assert!(r["improvement"].as_f64().unwrap() >= 0.0);
    assert_eq!(floats(&r["gamma_star"]).len(), 4);
}

#[test]
fn negative_divergence_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.json",
        "{\"input_bound\": 1.0, \"n\": 10,\n \"reference\": {\"dirac\": {\"log_inv_q\": [1.0, -0.5]}}}",
    );
    let out = msent(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("b.json:2"));
}
