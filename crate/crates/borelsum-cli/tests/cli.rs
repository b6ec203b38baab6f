//! End-to-end command tests against the built binary: exit codes, output
//! files, rerun determinism, checkpoint resume.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_borelsum")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn borelsum")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("borelsum-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

const FAST_GRID: &str = "\
[grid]
n_xi = 17
n_eta = 13
n_rho = 25
quad_order = 8
";

#[test]
fn print_defaults_roundtrips() {
    let out = run(&["--print-defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[potential]"));
    // the printed defaults must parse back
    borelsum::config::RunConfig::from_text(&text).unwrap();
}

#[test]
fn missing_config_exits_2() {
    let out = run(&["solve", "--config", "/nonexistent/borelsum.conf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_exits_2() {
    let dir = tmp_dir("badcfg");
    let cfg = write_file(&dir, "bad.conf", "[potential]\nkind = tesseract\n");
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("config error"), "stderr: {err}");
}

#[test]
fn unknown_flag_exits_2() {
    let out = run(&["solve", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn free_potential_solution_columns() {
    let dir = tmp_dir("free");
    let cfg = write_file(
        &dir,
        "run.conf",
        &format!(
            "[potential]\nkind = zero\n{FAST_GRID}[run]\nlambdas = 10\nn_x = 9\n"
        ),
    );
    let out_dir = dir.join("out");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("solution_lambda10.csv")).unwrap();
    // φ± ≡ 1/λ = 0.1, A = i, B = −i for every x
    for line in csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with('x')) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((cols[1] - 0.1).abs() < 1e-10, "re φ₊: {line}");
        assert!(cols[2].abs() < 1e-10);
        assert!((cols[6] - 1.0).abs() < 1e-9, "im A: {line}");
        assert!((cols[8] + 1.0).abs() < 1e-9, "im B: {line}");
    }
    // JSON summary exists and carries the reproducibility meta
    let json = std::fs::read_to_string(out_dir.join("summary_lambda10.json")).unwrap();
    assert!(json.contains("config_hash"));
}

#[test]
fn reruns_are_bitwise_identical() {
    let dir = tmp_dir("determinism");
    let cfg = write_file(
        &dir,
        "run.conf",
        &format!("[potential]\nkind = constant\nc = 1\n{FAST_GRID}[run]\nlambdas = 10\nn_x = 9\n"),
    );
    let out1 = dir.join("out1");
    let out2 = dir.join("out2");
    for (out_dir, threads) in [(&out1, "1"), (&out2, "2")] {
        let out = run(&[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["solution_lambda10.csv", "summary_lambda10.json"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "outputs differ for {name}");
    }
}

#[test]
fn constant_potential_matches_closed_form() {
    let dir = tmp_dir("constant");
    let cfg = write_file(
        &dir,
        "run.conf",
        "[potential]\nkind = constant\nc = 1\n[grid]\nn_xi = 21\nn_eta = 17\nn_rho = 41\nquad_order = 10\n[run]\nlambdas = 10\nn_x = 11\nx_min = -0.5\nx_max = 0.5\n",
    );
    let out_dir = dir.join("out");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("solution_lambda10.csv")).unwrap();
    for line in csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with('x')) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let exact = borelsum::oracle::constant_v_exact(1.0, 10.0, cols[0]);
        let got = num_complex::Complex64::new(cols[1], cols[2]);
        assert!(
            (got - exact).norm() / exact.norm() < 1e-4,
            "x = {}: {got} vs {exact}",
            cols[0]
        );
    }
}

#[test]
fn invariant_report_written() {
    let dir = tmp_dir("invariant");
    let cfg = write_file(
        &dir,
        "run.conf",
        &format!("[potential]\nkind = zero\n{FAST_GRID}[run]\nlambdas = 10\nn_x = 9\n"),
    );
    let out_dir = dir.join("out");
    let out = run(&[
        "invariant",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json = std::fs::read_to_string(out_dir.join("invariant_lambda10.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    // ψ(0) = 1/λ, ψ'(0) = i against V ≡ 0: a pure plus mode, C = 0
    assert!(v["drift_abs"].as_f64().unwrap() < 1e-10);
    assert!(v["c_median_re"].as_f64().unwrap().abs() < 1e-12);
    assert!(out_dir.join("trajectory_lambda10.csv").exists());
}

#[test]
fn verify_config_check_and_forced_failure() {
    let dir = tmp_dir("verify");
    // V ≡ 0 is exact: the config-scoped check passes at the default tolerance
    let good = write_file(
        &dir,
        "good.conf",
        &format!(
            "[potential]\nkind = zero\n{FAST_GRID}[run]\nlambdas = 10\nn_x = 9\n[verify]\nchecks = config-exactness\n"
        ),
    );
    let out_dir = dir.join("out");
    let out = run(&[
        "verify",
        "--config",
        good.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("config-exactness"));
    assert!(table.contains("PASS"));

    // tolerance tightened far below the discretization error fails, with
    // the failing check named
    let bad = write_file(
        &dir,
        "bad.conf",
        &format!(
            "[potential]\nkind = constant\nc = 1\n{FAST_GRID}[run]\nlambdas = 10\nn_x = 9\n[tolerances]\ninvariance_drift = 1e-14\n[verify]\nchecks = config-exactness\n"
        ),
    );
    let out = run(&[
        "verify",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("config-exactness") && table.contains("FAIL"), "{table}");
}

#[test]
fn checkpoint_resume_continues_quickly() {
    let dir = tmp_dir("checkpoint");
    let cfg = write_file(
        &dir,
        "run.conf",
        &format!("[potential]\nkind = constant\nc = 1\n{FAST_GRID}[run]\nlambdas = 10\nn_x = 9\n"),
    );
    let cp = dir.join("state.ckpt");
    let out_dir = dir.join("out");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--checkpoint",
        cp.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(cp.exists());
    let first = std::fs::read_to_string(out_dir.join("solution_lambda10.csv")).unwrap();
    // resume from the converged checkpoint: converges in one sweep and the
    // solution columns agree with the fresh run at solver tolerance
    let out2_dir = dir.join("out2");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out2_dir.to_str().unwrap(),
        "--checkpoint",
        cp.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let msg = String::from_utf8(out.stdout).unwrap();
    assert!(msg.contains("1 iterations"), "resume did not converge immediately: {msg}");
    let second = std::fs::read_to_string(out2_dir.join("solution_lambda10.csv")).unwrap();
    for (la, lb) in first.lines().zip(second.lines()) {
        if la.starts_with('#') || la.starts_with('x') {
            continue;
        }
        let a: Vec<f64> = la.split(',').map(|v| v.parse().unwrap()).collect();
        let b: Vec<f64> = lb.split(',').map(|v| v.parse().unwrap()).collect();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{la} vs {lb}");
        }
    }
    // mismatched checkpoint is rejected as a config error
    let other_cfg = write_file(
        &dir,
        "other.conf",
        &format!("[potential]\nkind = zero\n{FAST_GRID}[run]\nlambdas = 10\nn_x = 9\n"),
    );
    let out = run(&[
        "solve",
        "--config",
        other_cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--checkpoint",
        cp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn series_export_has_unit_leading_coefficient() {
    let dir = tmp_dir("series");
    let cfg = write_file(&dir, "run.conf", "[potential]\nkind = rational\n[run]\nlambdas = 10\n");
    let out_dir = dir.join("out");
    let out = run(&[
        "series",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("series.csv")).unwrap();
    for line in csv.lines().filter(|l| l.starts_with("1,")) {
        let cols: Vec<&str> = line.split(',').collect();
        let re: f64 = cols[2].parse().unwrap();
        assert!((re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn singularity_subcommand_reports_exponent() {
    let dir = tmp_dir("singularity");
    let cfg = write_file(
        &dir,
        "run.conf",
        "[singularity]\nbeta_re = 0.5\nv1 = constant:1\nn_s = 17\nn_theta = 81\nt_window_lo = 0.004\nt_window_hi = 0.03\n",
    );
    let out_dir = dir.join("out");
    let out = run(&[
        "singularity",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json = std::fs::read_to_string(out_dir.join("singularity.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let expo = v["fitted_exponent"].as_f64().unwrap();
    assert!((expo - 2.5).abs() < 0.05, "coarse-grid exponent {expo}");
    assert!(out_dir.join("singularity_remainder.csv").exists());
}

#[test]
fn verify_conjugacy_flag_reports_residual() {
    let dir = tmp_dir("conj");
    let cfg = write_file(
        &dir,
        "run.conf",
        &format!("[potential]\nkind = constant\nc = 1\n{FAST_GRID}[run]\nlambdas = 10\nn_x = 9\n"),
    );
    let out_dir = dir.join("out");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--verify-conjugacy",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json = std::fs::read_to_string(out_dir.join("summary_lambda10.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    // the independently solved minus field is the mirror image
    assert!(v["conjugacy_residual"].as_f64().unwrap() < 1e-12);
}
