use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infsup-lab"))
        .args(args)
        .env_remove("INFSUP_LAB_THREADS")
        .output()
        .expect("spawn infsup-lab")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn infsup_json_record() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    run_ok(&["infsup", "--pair", "mini", "--n", "4", "--json", path_str(&json)]);
    let v = read_json(&json);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["config", "results", "status", "version"]);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["config"]["pair"], "mini");
    let beta = v["results"]["beta"].as_f64().unwrap();
    assert!(beta > 0.1 && beta < 1.0, "{beta}");
    assert!(v["results"]["sigma"].as_array().unwrap().len() > 1);
}

#[test]
fn stokes_csv_and_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    let vtk = dir.path().join("f.vtk");
    run_ok(&["stokes", "--method", "th", "--n", "4", "--csv", path_str(&csv), "--vtk", path_str(&vtk)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,err_u_l2,err_u_h1,err_p_l2"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(row.len(), 4);
    assert!((row[0] - 2f64.sqrt() / 4.0).abs() < 1e-15);
    let vtk = std::fs::read_to_string(&vtk).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
    assert!(vtk.contains("POINTS 25 double"));
    assert!(vtk.contains("CELLS 32"));
}

#[test]
fn locking_prints_one_row_per_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("l.csv");
    let stdout = run_ok(&[
        "locking", "--method", "corrected", "--n", "4", "--lambdas", "1,1e3,1e6", "--f", "0,0", "--g", "1", "--csv",
        path_str(&csv),
    ]);
    assert_eq!(stdout.lines().filter(|l| l.trim_end().ends_with(" ok")).count(), 3);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("lambda,u_h1,p_h1,status"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn unstabilized_equal_order_is_reported_singular() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("s.json");
    let out = run(&["stokes", "--method", "p1p1-plain", "--n", "4", "--json", path_str(&json)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_json(&json)["status"], "singular");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["stokes", "--method", "nope"][..],
        &["stokes", "--n", "0"],
        &["infsup", "--mode", "sideways"],
        &["convergence", "--levels", "4,8"],
        &["locking", "--lambdas", "-1"],
        &["locking", "--f", "1"],
        &["weakbc", "--gamma", "0"],
        &["selftest", "--only", "14"],
        &["frobnicate"],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn help_shows_defaults() {
    for (cmd, flag) in [
        ("stokes", "[default: th]"),
        ("convergence", "[default: 8,16,32]"),
        ("infsup", "[default: weighted]"),
        ("locking", "[default: 1e2,1e4,1e6]"),
        ("weakbc", "[default: nitsche]"),
        ("selftest", "[default: 24301]"),
    ] {
        let help = run_ok(&[cmd, "--help"]);
        assert!(help.contains(flag), "{cmd}: {help}");
    }
}

#[test]
fn json_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = |p: &Path| vec!["weakbc".to_string(), "--n".into(), "4".into(), "--json".into(), path_str(p).into()];
    let run_with = |p: &Path| run_ok(&args(p).iter().map(String::as_str).collect::<Vec<_>>());
    run_with(&a);
    run_with(&b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn convergence_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("1.json");
    let three = dir.path().join("3.json");
    let base = ["convergence", "--family", "weakbc", "--method", "nitsche", "--levels", "4,8,16", "--json"];
    run_ok(&[&base[..], &[path_str(&one)]].concat());
    let out = Command::new(env!("CARGO_BIN_EXE_infsup-lab"))
        .args(base)
        .arg(&three)
        .env("INFSUP_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&three).unwrap());
    let slope = read_json(&one)["results"]["slopes"]["err_u_h1"].as_f64().unwrap();
    assert!(slope > 0.9, "{slope}");
}

#[test]
fn weakbc_equivalence_report() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("w.json");
    run_ok(&["weakbc", "--method", "bh", "--alpha", "0.1", "--trace", "p0", "--n", "4", "--equivalence", "--json", path_str(&json)]);
    let v = read_json(&json);
    let projected = v["results"]["equivalence"]["projected"].as_f64().unwrap();
    assert!(projected < 1e-9, "{projected}");
}

#[test]
fn selftest_subset() {
    let stdout = run_ok(&["selftest", "--only", "9,11"]);
    assert!(stdout.contains("criterion  9 PASS"));
    assert!(stdout.contains("criterion 11 PASS"));
    assert!(stdout.contains("2/2 criteria passed"));
}
