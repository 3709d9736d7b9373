//! End-to-end runs of the compiled binary: output schemas, determinism
//! across worker counts, crash-resume, and error reporting.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

const BIN: &str = env!("CARGO_BIN_EXE_bilayer");

fn bilayer(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_SWEEP: &str = r#"
mode = "observables"
seed = 5
[lattice]
l_values = [2]
boundary = "open"
[couplings]
g_values = [0.5, 3.0]
[run]
beta = 2.0
equil_sweeps = 100
bins = 10
bin_size = 25
slice_average = true
"#;

#[test]
fn run_writes_estimator_tables() {
    let dir = tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", SMALL_SWEEP);
    let out = dir.path().join("out");

    let res = bilayer(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let csv = fs::read_to_string(out.join("estimators.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "l,g,beta,seed,observable,mean,error,n_bins"
    );
    let body: Vec<&str> = lines.collect();
    for label in ["energy", "m_abs", "m2", "m4", "binder", "chi"] {
        for g in ["0.5", "3.0"] {
            assert!(
                body.iter().any(|l| {
                    let f: Vec<&str> = l.split(',').collect();
                    f[1] == g && f[4] == label
                }),
                "missing row for g = {g}, observable = {label}"
            );
        }
    }

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("estimators.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), body.len());
}

#[test]
fn worker_count_leaves_outputs_byte_identical() {
    let dir = tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", SMALL_SWEEP);
    let out1 = dir.path().join("w1");
    let out8 = dir.path().join("w8");

    for (out, workers) in [(&out1, "1"), (&out8, "8")] {
        let res = bilayer(&[
            "run",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(res.status.success());
    }

    for name in ["estimators.csv", "estimators.json"] {
        assert_eq!(
            fs::read(out1.join(name)).unwrap(),
            fs::read(out8.join(name)).unwrap(),
            "{name} differs between worker counts"
        );
    }
}

#[test]
fn interrupted_run_resumes_to_identical_output() {
    let dir = tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", SMALL_SWEEP);
    let full = dir.path().join("full");
    let resumed = dir.path().join("resumed");

    let res = bilayer(&["run", "--config", &config, "--out", full.to_str().unwrap()]);
    assert!(res.status.success());

    // Simulated crash at bin 5 of 10: exit code 3, no tables, but a
    // progress manifest and checkpoints.
    let res = bilayer(&[
        "run",
        "--config",
        &config,
        "--out",
        resumed.to_str().unwrap(),
        "--stop-after-bins",
        "5",
    ]);
    assert_eq!(res.status.code(), Some(3));
    let err: serde_json::Value =
        serde_json::from_slice(&res.stderr).expect("machine-readable stderr");
    assert_eq!(err["kind"], "stopped-early");
    assert!(!resumed.join("estimators.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(resumed.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["bins_completed"] == 5));

    let res = bilayer(&[
        "run",
        "--config",
        &config,
        "--out",
        resumed.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    assert_eq!(
        fs::read(full.join("estimators.csv")).unwrap(),
        fs::read(resumed.join("estimators.csv")).unwrap()
    );
}

#[test]
fn replica_run_writes_correlator_tables() {
    let dir = tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "eh.toml",
        r#"
mode = "replica-eh"
seed = 3
[lattice]
l = 2
boundary = "open"
[couplings]
g = 3.0
[run]
beta = 2.0
equil_sweeps = 100
bins = 5
bin_size = 20
n_rep = 3
"#,
    );
    let out = dir.path().join("out");
    let res = bilayer(&[
        "replica-eh",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let onsite = fs::read_to_string(out.join("replica_onsite.csv")).unwrap();
    let mut lines = onsite.lines();
    assert_eq!(lines.next().unwrap(), "l,g,beta,n_rep,site,tau,G,error");
    // 4 layer-A sites x 3 replica offsets, every estimate exactly 1.
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[6], "1.0", "on-site correlator should be exactly one");
    }

    let momentum = fs::read_to_string(out.join("replica_momentum.csv")).unwrap();
    assert_eq!(
        momentum.lines().next().unwrap(),
        "l,g,beta,n_rep,k_m,k_n,tau,G,error"
    );
    assert_eq!(momentum.lines().count(), 1 + 12);
}

#[test]
fn ed_run_writes_report() {
    let dir = tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "ed.toml",
        r#"
mode = "ed"
[lattice]
l = 2
boundary = "open"
[couplings]
g = 3.0
[run]
beta = 4.0
n_rep = 3
"#,
    );
    let out = dir.path().join("out");
    let res = bilayer(&["ed", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ed.json")).unwrap()).unwrap();
    assert_eq!(report["l"], 2);
    assert_eq!(report["n_rep"], 3);
    let lambda: Vec<f64> = report["lambda"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let total: f64 = lambda.iter().sum();
    assert!((total - 1.0).abs() < 1e-9, "spectrum should sum to one");
    assert!(report["diag_defect"].as_f64().unwrap() < 1e-12);
}

#[test]
fn analysis_pipeline_runs_on_generated_tables() {
    let dir = tempdir().unwrap();
    // Synthetic curves L (g - 3) crossing exactly at g = 3.
    let mut csv = String::from("l,g,beta,seed,observable,mean,error,n_bins\n");
    for l in [8, 12, 16] {
        for i in 0..9 {
            let g = 2.9 + 0.025 * f64::from(i);
            csv.push_str(&format!(
                "{l},{g},{beta},1,binder,{m},0.001,20\n",
                beta = 2.0 * f64::from(l),
                m = f64::from(l) * (g - 3.0)
            ));
        }
    }
    let input = dir.path().join("est.csv");
    fs::write(&input, csv).unwrap();

    let report_path = dir.path().join("analysis.json");
    let res = bilayer(&[
        "analyze",
        "--in",
        input.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!((report["g_c"].as_f64().unwrap() - 3.0).abs() < 1e-3);
    assert_eq!(report["crossings"].as_array().unwrap().len(), 3);

    let collapse_path = dir.path().join("collapse.json");
    let res = bilayer(&[
        "collapse",
        "--in",
        input.to_str().unwrap(),
        "--g-c",
        "3.0",
        "--nu",
        "1.0",
        "--out",
        collapse_path.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&collapse_path).unwrap()).unwrap();
    assert!(report["cost"].as_f64().unwrap().is_finite());
    let points = fs::read_to_string(dir.path().join("collapse.csv")).unwrap();
    assert_eq!(points.lines().next().unwrap(), "l,g,x,y,y_error");
    assert_eq!(points.lines().count(), 1 + 27);
}

#[test]
fn failures_exit_nonzero_with_machine_readable_stderr() {
    let dir = tempdir().unwrap();

    // Config that fails validation.
    let config = write_config(
        dir.path(),
        "bad.toml",
        "mode = \"observables\"\n[lattice]\nl = 8\n[couplings]\ng = -1.0\n",
    );
    let res = bilayer(&["run", "--config", &config]);
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["kind"], "config");

    // Missing file.
    let res = bilayer(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(res.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["kind"], "io");

    // Unknown flag: clap's usage error.
    let res = bilayer(&["run", "--config", &config, "--bogus"]);
    assert_eq!(res.status.code(), Some(2));

    // Subcommand incompatible with the config grid.
    let sweep = write_config(dir.path(), "sweep.toml", SMALL_SWEEP);
    let res = bilayer(&["ed", "--config", &sweep]);
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["kind"], "config");
}
