use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn geomilne(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomilne"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn preset(name: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let o = geomilne(&["show-config", "--preset", name], dir.path());
    assert!(o.status.success());
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

/// A small configuration that keeps every subcommand under a few seconds.
fn small(mut v: Value) -> Value {
    v["grids"]["n_eta"] = 33.into();
    v["grids"]["n_phi"] = 32.into();
    v["grids"]["n_ordinates"] = 16.into();
    v["grids"]["mesh_resolution"] = 4.into();
    v["decomposition"]["n_tau"] = 8.into();
    v
}

#[test]
fn milne_writes_solution_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small(preset("unit-disk")));
    let o = geomilne(&["milne", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("milne_solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eta,phi,f"));
    assert_eq!(lines.count(), 33 * 32);
    let meta = json(&dir.path().join("milne_meta.json"));
    for key in ["epsilon", "R_kappa", "L", "f_L", "iterations", "residual"] {
        assert!(meta.get(key).is_some(), "missing {key}");
    }
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "milne");
    assert_eq!(manifest["config"]["grids"]["n_eta"], 33);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = write_config(a.path(), &small(preset("ellipse")));
    for d in [a.path(), b.path()] {
        assert!(geomilne(&["transport", "--config", &cfg], d).status.success());
        assert!(geomilne(&["decompose", "--config", &cfg], d).status.success());
    }
    for f in ["transport_field.csv", "transport_meta.json", "decomposition.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let header = std::fs::read_to_string(a.path().join("decomposition.csv")).unwrap();
    assert!(header.starts_with("tau,phi,g,g_flat,g_sharp\n"));
}

#[test]
fn missing_key_exits_with_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = preset("unit-disk");
    v["grids"].as_object_mut().unwrap().remove("n_phi");
    let cfg = write_config(dir.path(), &v);
    let o = geomilne(&["milne", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = json(&dir.path().join("error.json"));
    assert_eq!(err["error"], "config");
    assert_eq!(err["key"], "grids");
    assert!(err["message"].as_str().unwrap().contains("n_phi"));
}

#[test]
fn out_of_range_values_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for (path, value) in [("alpha", 1.5), ("epsilon", 0.8)] {
        let mut v = preset("unit-disk");
        match path {
            "alpha" => v["decomposition"]["alpha"] = value.into(),
            _ => v["epsilons"] = serde_json::json!([value]),
        }
        let cfg = write_config(dir.path(), &v);
        let o = geomilne(&["decompose", "--config", &cfg], dir.path());
        assert_eq!(o.status.code(), Some(2), "{path}");
    }
}

#[test]
fn non_convergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small(preset("unit-disk"));
    v["tolerances"]["max_iter"] = 1.into();
    v["solver"]["anderson"] = false.into();
    let cfg = write_config(dir.path(), &v);
    let o = geomilne(&["milne", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&dir.path().join("error.json"))["error"], "no_convergence");
}

#[test]
fn limit_study_has_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small(preset("limit-study"));
    v["epsilons"] = serde_json::json!([0.4, 0.3, 0.2]);
    let cfg = write_config(dir.path(), &v);
    let o = geomilne(&["limit-study", "--config", &cfg, "--threads", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("limit_study.json"));
    for key in ["epsilons", "r0_sup", "r0_l2"] {
        assert_eq!(s[key].as_array().unwrap().len(), 3, "{key}");
    }
    assert!(s["fitted_order"].is_number());
    assert!(s["components"].is_object());
    let csv = std::fs::read_to_string(dir.path().join("limit_study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn expand_and_verify_subset_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small(preset("unit-disk")));
    let o = geomilne(&["expand", "--config", &cfg, "--layers"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("expansion_meta.json").exists());
    assert!(dir.path().join("layer_0.csv").exists());

    let o = geomilne(&["verify", "--preset", "verify", "--only", "1,2", "--strict"], dir.path());
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    let v = json(&dir.path().join("verify.json"));
    assert_eq!(v["total"], 2);
}
