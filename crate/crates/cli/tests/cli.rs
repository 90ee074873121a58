use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn iuws(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iuws"))
        .args(args)
        .current_dir(dir)
        .env_remove("IUWS_JOBS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn disk(h: f64, half: f64) -> Value {
    json!({
        "name": "disk",
        "surface": "euclidean",
        "window": { "umin": -half, "umax": half, "vmin": -half, "vmax": half },
        "h": h,
        "domain": { "kind": "geodesic_ball", "center": { "u": 0.0, "v": 0.0 }, "radius": 1.0 },
        "pole": { "u": 0.0, "v": 0.0 },
        "point": { "u": 0.5, "v": 0.0 }
    })
}

fn results(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice::<Value>(&out.stdout).unwrap()["results"].clone()
}

#[test]
fn eigen_on_the_unit_disk() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "disk", &disk(0.02, 1.2));
    let r = results(&iuws(&["eigen", "--config", "disk.json"], dir.path()));
    let lambda = r["lambda"].as_f64().unwrap();
    // j₀,₁² = 5.78319; the 5-point scheme sits about 1% low at h = 0.02.
    assert!((lambda / 5.78319 - 1.0).abs() < 0.02, "{lambda}");
    let csv = std::fs::read_to_string(dir.path().join("out/disk.eigen.eigenfunction.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,value"));
    assert_eq!(csv.lines().count(), r["nodes"].as_u64().unwrap() as usize + 1);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = iuws(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(iuws(&[], dir.path()).status.code(), Some(2));
}

#[test]
fn invalid_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "disk", &disk(0.05, 1.2));
    for args in [
        &["torsion", "--config", "missing.json"][..],
        &["torsion", "--config", "disk.json", "--h", "-1"],
        &["capwidth", "--config", "disk.json", "--eta", "1.5"],
        &["torsion", "--config", "disk.json", "--jobs", "0"],
        &["verify", "--corpus", "nonexistent"],
    ] {
        assert_eq!(iuws(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
    let mut bad = disk(0.05, 1.2);
    bad["colour"] = json!("blue");
    write_config(dir.path(), "bad", &bad);
    assert_eq!(iuws(&["torsion", "--config", "bad.json"], dir.path()).status.code(), Some(2));
    // Condensers of the width search must fit in the window.
    assert_eq!(iuws(&["capwidth", "--config", "disk.json"], dir.path()).status.code(), Some(0));
    let mut tight = disk(0.05, 1.2);
    tight["rmax"] = json!(1.0);
    write_config(dir.path(), "tight", &tight);
    let out = iuws(&["capwidth", "--config", "tight.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("leaves the window"));
}

#[test]
fn reports_are_deterministic_without_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = disk(0.05, 1.2);
    cfg["paths"] = json!(2000);
    write_config(dir.path(), "disk", &cfg);
    for cmd in ["torsion", "survival", "mc"] {
        let run = || {
            let o = iuws(&[cmd, "--config", "disk.json", "--no-timestamp"], dir.path());
            assert!(o.status.success());
            std::fs::read(dir.path().join(format!("out/disk.{cmd}.json"))).unwrap()
        };
        let first = run();
        assert_eq!(first, run(), "{cmd}");
    }
    let stamped = iuws(&["torsion", "--config", "disk.json"], dir.path());
    let v: Value = serde_json::from_slice(&stamped.stdout).unwrap();
    assert!(v["generated_unix"].is_u64() && v["runtime_s"].is_f64());
}

#[test]
fn emitted_config_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "disk", &disk(0.05, 1.2));
    let out = iuws(&["torsion", "--config", "disk.json", "--eta", "0.3", "--seed", "9"], dir.path());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let emitted = report["config"].clone();
    assert_eq!(emitted["eta"], json!(0.3));
    assert_eq!(emitted["seed"], json!(9));
    write_config(dir.path(), "again", &emitted);
    let again = iuws(&["torsion", "--config", "again.json"], dir.path());
    let second: Value = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(second["config"], emitted);
    assert_eq!(second["results"], report["results"]);
}

#[test]
fn length_scale_rescales_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "unit", &disk(0.05, 1.2));
    // The same disk described at twice the size.
    let mut big = disk(0.1, 2.4);
    big["domain"]["radius"] = json!(2.0);
    big["pole"] = json!({ "u": 0.0, "v": 0.0 });
    big["point"] = json!({ "u": 1.0, "v": 0.0 });
    write_config(dir.path(), "big", &big);
    let unit = results(&iuws(&["eigen", "--config", "unit.json"], dir.path()));
    let scaled = results(&iuws(&["eigen", "--config", "big.json", "--length-scale", "2"], dir.path()));
    let (a, b) = (unit["lambda"].as_f64().unwrap(), scaled["lambda"].as_f64().unwrap());
    assert!((a / 4.0 - b).abs() < 1e-9 * a, "{a} {b}");
    let ut = results(&iuws(&["torsion", "--config", "unit.json"], dir.path()));
    let st = results(&iuws(&["torsion", "--config", "big.json", "--length-scale", "2"], dir.path()));
    assert!((4.0 * ut["sup"].as_f64().unwrap() - st["sup"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn solver_subcommands_produce_their_fields() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = disk(0.05, 3.3);
    cfg["rmax"] = json!(1.05);
    cfg["paths"] = json!(5000);
    cfg["samples"] = json!(8);
    write_config(dir.path(), "disk", &cfg);
    let run = |cmd: &str| results(&iuws(&[cmd, "--config", "disk.json", "--jobs", "1"], dir.path()));

    let g = run("green");
    let probe = g["probe"]["value"].as_f64().unwrap();
    assert!((probe / (2f64.ln() / std::f64::consts::TAU) - 1.0).abs() < 0.05, "{probe}");

    let w = run("capwidth");
    let width = w["w"].as_f64().unwrap();
    assert!(width > 0.5 && width <= 1.05, "{width}");

    let s = run("survival");
    assert_eq!(s["survival"].as_array().unwrap().len(), 4);
    assert_eq!(s["lower_bound_holds"], json!(true));
    assert_eq!(s["upper_bound_holds"], json!(true));

    let k = run("heat-kernel");
    let mass = k["columns"][0]["mass"].as_f64().unwrap();
    assert!(mass > 0.0 && mass < 1.0);

    let iu = run("iu-check");
    assert_eq!(iu["integral"]["cauchy"], json!(true));
    assert!(iu["ratio"]["spread"].as_f64().unwrap() < 10.0);

    let m = run("mc");
    for row in m["survival"].as_array().unwrap() {
        assert!(row["z"].as_f64().unwrap().abs() < 4.0, "{row}");
    }
}

#[test]
fn verify_subset_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = iuws(&["verify", "--only", "geometry.", "--only", "cli.config", "--no-timestamp"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/verify.standard.json")).unwrap()).unwrap();
    let ids: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"geometry.triangle_inequality") && ids.contains(&"cli.config_round_trip"));
    assert!(report.get("generated_unix").is_none_or(Value::is_null));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[PASS] geometry.triangle_inequality"));
}
