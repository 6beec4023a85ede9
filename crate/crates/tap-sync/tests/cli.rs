//! End-to-end tests of the tap-sync binary: exit codes, artifact formats,
//! and cross-command workflows on small instances.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tap-sync"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be one JSON object")
}

#[test]
fn fixed_point_prints_scalar_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["fixed-point", "--lambda", "1.5", "--kmax", "12"]);
    let v = stdout_json(&out);
    assert!((v["q_star"].as_f64().unwrap() - 0.6923).abs() < 5e-4);
    assert!(v["e_star"].as_f64().unwrap() < 0.0);
    assert!(v["b_star"].as_f64().unwrap() > 0.0);
    let gammas = v["gammas"].as_array().unwrap();
    assert_eq!(gammas.len(), 13);
    let last = gammas.last().unwrap().as_f64().unwrap();
    let q_star = v["q_star"].as_f64().unwrap();
    let lambda = 1.5f64;
    assert!((last - lambda * lambda * q_star).abs() < 1e-3);
}

#[test]
fn missing_required_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["solve"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--lambda"));

    let out = run_in(dir.path(), &["experiment"]);
    assert_eq!(out.status.code(), Some(2));

    // clap usage errors share the configuration exit code
    let out = run_in(dir.path(), &["solve", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // spectral initialization requires lambda > 1
    let out = run_in(
        dir.path(),
        &["solve", "--lambda", "0.8", "--n", "60", "--method", "ngd"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn solve_trace_has_documented_columns_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "solve",
        "--lambda",
        "1.5",
        "--n",
        "120",
        "--seed",
        "3",
        "--method",
        "amp",
        "--out",
        "a.csv",
    ];
    let out = run_in(dir.path(), &args);
    let v = stdout_json(&out);
    assert_eq!(v["status"], "converged");
    assert!(v["grad_sq"].as_f64().unwrap() < 1e-10);
    assert!(v["f_tap"].as_f64().unwrap() < 0.0);

    let trace = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,f_tap,grad_sq,Q,M,overlap,residual"
    );
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,"));
    // no reference vector was supplied, so the residual column is NaN
    assert!(first.ends_with(",NaN"));
    for line in trace.lines().skip(1) {
        assert_eq!(line.split(',').count(), 7);
    }

    let mut args2 = args;
    args2[args.len() - 1] = "b.csv";
    run_in(dir.path(), &args2);
    let again = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(trace, again, "same seed must give a byte-identical trace");
}

#[test]
fn solve_then_diagnostics_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "solve",
            "--lambda",
            "1.5",
            "--n",
            "120",
            "--seed",
            "7",
            "--method",
            "amp",
            "--save-instance",
            "inst",
            "--m-out",
            "m.csv",
            "--out",
            "trace.csv",
        ],
    );
    stdout_json(&out);
    assert!(dir.path().join("inst.csv").exists());
    assert!(dir.path().join("inst.json").exists());

    let out = run_in(
        dir.path(),
        &[
            "diagnostics",
            "--instance",
            "inst",
            "--at",
            "m.csv",
            "--out",
            "report.json",
            "--spectrum-out",
            "spectrum.csv",
        ],
    );
    let v = stdout_json(&out);
    assert!(v["lambda_min_hessian"].as_f64().unwrap() > 0.0);
    let radius = v["spectral_radius"].as_f64().unwrap();
    assert!(radius > 0.0 && radius < 1.0);
    assert_eq!(v["bethe_pass_plus"], true);
    assert_eq!(v["bethe_pass_minus"], true);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["jacobian_spectrum"].as_array().unwrap().len(), 2 * 120);
    assert!(report["grad_sq_norm"].as_f64().unwrap() < 1e-10);

    let spectrum = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("re,im\n"));
    assert_eq!(spectrum.lines().count(), 1 + 2 * 120);

    // same instance, minimizer recomputed internally instead of --at
    let out = run_in(
        dir.path(),
        &["diagnostics", "--instance", "inst", "--out", "r2.json"],
    );
    let v2 = stdout_json(&out);
    let r1 = v["spectral_radius"].as_f64().unwrap();
    let r2 = v2["spectral_radius"].as_f64().unwrap();
    assert!((r1 - r2).abs() < 1e-6);
}

#[test]
fn diagnostics_rejects_mismatched_magnetization_file() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "solve",
            "--lambda",
            "1.5",
            "--n",
            "60",
            "--method",
            "amp",
            "--save-instance",
            "inst",
            "--out",
            "t.csv",
        ],
    );
    std::fs::write(dir.path().join("short.csv"), "m\n0.5\n0.5\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "diagnostics",
            "--instance",
            "inst",
            "--at",
            "short.csv",
            "--out",
            "r.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("60"));
}

#[test]
fn landscape_grid_csv_and_argmin() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "landscape",
            "--lambda",
            "1.5",
            "--nq",
            "15",
            "--nphi",
            "15",
            "--out",
            "grid.csv",
        ],
    );
    let v = stdout_json(&out);
    let q = v["argmin_q"].as_f64().unwrap();
    assert!(q > 0.0 && q < 1.0);
    assert!((q - 0.6923).abs() < 0.08, "argmin q should sit near 0.69");

    let grid = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert!(grid.starts_with("q,phi,value\n"));
    let rows = grid.lines().count() - 1;
    assert!(rows > 0 && rows <= 15 * 15, "infeasible cells are skipped");
}

#[test]
fn experiment_from_config_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
experiment = "convergence"
n = 60
lambdas = [1.5]
etas = [0.2]
replicates = 2
master_seed = 9
amp_iters = 60
ngd_iters = 400
output_dir = "run1"
"#;
    std::fs::write(dir.path().join("cfg.toml"), config).unwrap();
    let out = run_in(dir.path(), &["experiment", "--config", "cfg.toml"]);
    let v = stdout_json(&out);
    assert_eq!(v["experiment"], "convergence");
    assert_eq!(v["excluded"].as_u64(), Some(0));
    let manifest_path = dir.path().join("run1/manifest.json");
    assert!(manifest_path.exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    // manifest paths are relative to the experiment directory
    for entry in manifest["outputs"].as_array().unwrap() {
        assert!(
            dir.path().join("run1").join(entry["path"].as_str().unwrap()).exists(),
            "manifest must list files that exist"
        );
    }

    // identical config into a fresh directory: identical checksums
    let out = run_in(
        dir.path(),
        &["experiment", "--config", "cfg.toml", "--out", "run2"],
    );
    stdout_json(&out);
    let manifest2: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run2/manifest.json")).unwrap(),
    )
    .unwrap();
    let sha = |m: &serde_json::Value| -> Vec<String> {
        m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["sha256"].as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(sha(&manifest), sha(&manifest2));

    // a different master seed must change the data checksums
    std::fs::write(
        dir.path().join("cfg2.toml"),
        config.replace("master_seed = 9", "master_seed = 10"),
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &["experiment", "--config", "cfg2.toml", "--out", "run3"],
    );
    stdout_json(&out);
    let manifest3: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run3/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_ne!(sha(&manifest), sha(&manifest3));
}

#[test]
fn experiment_name_overrides_config_kind() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
experiment = "convergence"
n = 50
lambdas = [1.5]
replicates = 1
grid_points = 12
output_dir = "out"
"#;
    std::fs::write(dir.path().join("cfg.toml"), config).unwrap();
    let out = run_in(
        dir.path(),
        &["experiment", "--config", "cfg.toml", "--name", "landscape"],
    );
    let v = stdout_json(&out);
    assert_eq!(v["experiment"], "landscape");
    assert!(dir.path().join("out/landscape_lambda_1.5.csv").exists());
}

#[test]
fn plot_template_prints_python_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["plot-template"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("#!/usr/bin/env python3"));
    for key in [
        "convergence",
        "success_heatmap",
        "universality",
        "tap_vs_vb",
        "jacobian_scatter",
        "landscape",
    ] {
        assert!(text.contains(key), "plotter for {key} missing");
    }
}
