use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn bridgebound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bridgebound")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn out_dir(tmp: &tempfile::TempDir, name: &str) -> String {
    tmp.path().join(name).display().to_string()
}

#[test]
fn coupling_suite_writes_two_reports_per_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "lemma");
    let o = bridgebound(&["verify", "--suite", "lemma", "--seed", "7", "--instances", "100", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reports: Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("reports.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 200);
    let summary = fs::read_to_string(Path::new(&out).join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some("name,lhs,rhs,slack,pass"));
    assert_eq!(summary.lines().count(), 201);
}

#[test]
fn decay_suite_on_a_model_writes_the_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "decay");
    let model = data("gauss1d.json");
    let o = bridgebound(&["verify", "--suite", "decay", "--model", model.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(Path::new(&out).join("decay.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,H_n,bound_n"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r[1] <= r[2] + 1e-10));
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"backend\": \"grid\", \"mu\": ").unwrap();
    let out = out_dir(&tmp, "never");
    let o = bridgebound(&["verify", "--suite", "decay", "--model", bad.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("config"));
    assert!(!Path::new(&out).exists());

    fs::write(&bad, "{\"backend\": \"grid\", \"d\": 1, \"colour\": 3}").unwrap();
    assert_eq!(code(&bridgebound(&["bridge", "--model", bad.to_str().unwrap(), "--out", &out])), 2);
    assert!(!Path::new(&out).exists());
}

#[test]
fn invalid_arguments_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "never");
    let model = data("grid1d.json");
    let model = model.to_str().unwrap();
    for args in [
        vec!["verify", "--suite", "everything", "--out", &out],
        vec!["verify", "--out", &out],
        vec!["verify", "--suite", "lemma", "--instances", "0", "--out", &out],
        vec!["bridge", "--model", model, "--tol", "-1", "--out", &out],
        vec!["bridge", "--model", "/nonexistent/model.json", "--out", &out],
        vec!["frobnicate"],
    ] {
        let o = bridgebound(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
    assert!(!Path::new(&out).exists());
    let o = Command::new(env!("CARGO_BIN_EXE_bridgebound"))
        .args(["verify", "--suite", "lemma", "--out", &out])
        .env("BRIDGEBOUND_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn gaussian_bridge_prints_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "bridge");
    let o = bridgebound(&["bridge", "--model", data("gauss1d.json").to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["backend"], "gaussian");
    assert!(v["u"]["a"].is_array() && v["v"]["b"].is_array() && v["cov"].is_array());
    assert_eq!(fs::read(Path::new(&out).join("bridge.json")).unwrap(), o.stdout);
    let fields = fs::read_to_string(Path::new(&out).join("fields.csv")).unwrap();
    assert_eq!(fields.lines().next(), Some("x0,U,V,m0,sigma0,m_conj0,sigma_conj0"));
}

#[test]
fn grid_bridge_trajectory_residual_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "bridge");
    let o = bridgebound(&["bridge", "--model", data("grid1d.json").to_str().unwrap(), "--tol", "1e-10", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(Path::new(&out).join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,residual_mu,residual_eta,kl_to_bridge,gauge"));
    let free: Vec<f64> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').take(3).map(|x| x.parse().unwrap()).collect();
            f[1].max(f[2])
        })
        .collect();
    assert!(free.len() > 5);
    assert!(free.windows(2).all(|w| w[1] <= w[0]), "{free:?}");
    assert!(*free.last().unwrap() <= 1e-10);
}

#[test]
fn infeasible_support_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "never");
    let o = bridgebound(&["bridge", "--model", data("infeasible.json").to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("infeasible support"), "{}", stderr(&o));
    assert!(!Path::new(&out).exists());
}

#[test]
fn iteration_cap_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let capped = tmp.path().join("capped.json");
    let mut model: Value = serde_json::from_str(&fs::read_to_string(data("grid1d.json")).unwrap()).unwrap();
    model["max_iter"] = Value::from(3);
    fs::write(&capped, model.to_string()).unwrap();
    let o = bridgebound(&["bridge", "--model", capped.to_str().unwrap(), "--out", &out_dir(&tmp, "never")]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("no convergence"));
}

#[test]
fn oracle_compare_default_passes_and_coarse_grid_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bridgebound(&["oracle-compare", "--out", &out_dir(&tmp, "fine")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = bridgebound(&["oracle-compare", "--model", data("coarse_grid.json").to_str().unwrap(), "--out", &out_dir(&tmp, "coarse")]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], false);
    assert!(v["discrepancies"].as_array().unwrap().iter().any(|d| d["pass"] == false));
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str, args: &[&str]| -> Vec<(String, Vec<u8>)> {
        let out = out_dir(&tmp, name);
        let mut full = args.to_vec();
        full.extend(["--out", &out]);
        let o = Command::new(env!("CARGO_BIN_EXE_bridgebound")).args(&full).env("BRIDGEBOUND_THREADS", threads).output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let verify = ["verify", "--suite", "theorem1", "--seed", "11", "--instances", "12"];
    assert_eq!(run("a", "1", &verify), run("b", "3", &verify));
    let oracle = ["oracle-compare"];
    assert_eq!(run("c", "1", &oracle), run("d", "2", &oracle));
}
