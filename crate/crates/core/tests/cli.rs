use std::process::{Command, Output};

use serde_json::Value;

fn staticgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_staticgeo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn connect_minkowski_is_a_geodesic() {
    let out = staticgeo(&["connect", "--spacetime", "minkowski", "--p0", "0,0", "--p1", "2,1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["result"]["status"], "geodesic");
    assert_eq!(r["result"]["character"], "timelike");
}

#[test]
fn arrival_around_the_slit_is_not_attained() {
    let out = staticgeo(&["arrival", "--spacetime", "slit_plane", "--p", "0,0,0", "--target", "2,2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let t = r["result"]["infimum_t"].as_f64().unwrap();
    assert!((t - 8f64.sqrt()).abs() < 1e-6, "{t}");
    assert_eq!(r["result"]["attained"], false);
}

#[test]
fn ads_bad_pair_diverges() {
    let out = staticgeo(&["connect", "--spacetime", "ads_strip", "--p0", "0,0", "--p1", "2.8,0.4"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(report(&out)["result"]["status"], "diverged");
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        &["connect", "--spacetime", "nope", "--p0", "0,0", "--p1", "1,0"][..],
        &["connect", "--spacetime", "ads_strip", "--p0", "0,0.8", "--p1", "1,0"],
        &["connect", "--spacetime", "minkowski", "--p0", "0,0", "--p1", "1,x"],
        &["connect", "--spacetime", "minkowski", "--m", "2", "--p0", "0,0", "--p1", "1,0"],
        &["arrival", "--spacetime", "slit_plane", "--p", "0,0,0", "--target", "1,0.5"],
        &["integrate", "--spacetime", "quad_beta", "--tol", "-1", "--p", "0,0,0", "--v", "1,0,0"],
    ] {
        let out = staticgeo(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = staticgeo(&["connect", "--spacetime", "nope", "--p0", "0,0", "--p1", "1,0"]);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("connect") && msg.contains("nope"), "{msg}");
}

#[test]
fn iteration_budget_exhausted_exits_3() {
    let out = staticgeo(&[
        "connect", "--spacetime", "quad_beta", "--p0", "0,-1,0.5", "--p1", "5,1,1", "--max-iter", "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out)["result"]["status"], "max_iter");
}

#[test]
fn catalog_lists_the_entries() {
    let out = staticgeo(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = report(&out)["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap().to_string())
        .collect();
    for n in ["minkowski", "schwarzschild_exterior", "ads_strip", "slit_plane", "quad_beta", "superquad_beta", "inv_beta_superquad"] {
        assert!(names.iter().any(|m| m == n), "{n} missing from {names:?}");
    }
}

#[test]
fn config_file_with_flag_override_writes_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(
        &cfg,
        r#"{"command": "connect", "spacetime": "quad_beta", "seed": 3,
            "params": {"p0": [0.0, -1.0, 0.0], "p1": [2.0, 1.0, 0.5], "segments": 64}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = staticgeo(&[
        "connect",
        "--config",
        cfg.to_str().unwrap(),
        "--segments",
        "32",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(written, report(&out));
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["params"]["segments"], 32);
    assert_eq!(manifest["config"]["params"]["p1"][2], 0.5);
    assert_eq!(manifest["config"]["seed"], 3);
    assert_eq!(manifest["exit_code"], 0);
    assert!(out_dir.join("curve.csv").exists());

    // a config for another command is rejected
    let out = staticgeo(&["arrival", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
