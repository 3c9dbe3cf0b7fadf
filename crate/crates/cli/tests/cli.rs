use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn helfrich(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helfrich"))
        .current_dir(dir)
        .env_remove("HELFRICH_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn scan_brackets_critical_radius() {
    let dir = tempfile::tempdir().unwrap();
    let o = helfrich(dir.path(), &["scan", "--l1", "1", "--l2", "-1", "--rmin", "0.5", "--rmax", "4", "--n", "100", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("r/scan.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "rho,residual,energy,abs_energy");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    assert_eq!(rows.len(), 100);
    let changes: Vec<_> = rows.windows(2).filter(|w| w[0].1.signum() != w[1].1.signum()).collect();
    assert_eq!(changes.len(), 1);
    assert!(changes[0][0].0 < 2.0 && changes[0][1].0 > 2.0);
    let summary = json(&dir.path().join("r/scan.json"));
    assert_eq!(summary["critical_radius"], 2.0);
    assert!(dir.path().join("r/scan.meta.json").is_file());
}

#[test]
fn missing_mesh_is_exit_two_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = helfrich(dir.path(), &["energy-eval", "--mesh", "missing.obj"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.obj"));
}

#[test]
fn usage_errors_are_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&helfrich(dir.path(), &["no-such-command"])), 2);
    assert_eq!(code(&helfrich(dir.path(), &["scan", "--rmin", "3", "--rmax", "1"])), 2);
    assert_eq!(code(&helfrich(dir.path(), &["scan", "--l1", "-1"])), 2);
    assert_eq!(code(&helfrich(dir.path(), &["energy-eval", "--radius", "2"])), 2);
    assert_eq!(code(&helfrich(dir.path(), &["variation-check", "--primitive", "icosphere"])), 2);
    fs::write(dir.path().join("bad.json"), r#"{"params": {"l1": 1.0, "l3": 2.0}}"#).unwrap();
    let o = helfrich(dir.path(), &["scan", "--config", "bad.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("l3"));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_helfrich"))
            .current_dir(dir.path())
            .env("HELFRICH_THREADS", v)
            .args(["scan", "--n", "10"])
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("0")), 2);
    assert_eq!(code(&run("many")), 2);
    let o = run("2");
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("helfrich-out/scan.meta.json"))["threads"], 2);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.json"),
        r#"{"output_dir": "cfg", "params": {"c0": 0.0, "l1": 5.0, "l2": -1.0}, "scan": {"rho_min": 1.0, "rho_max": 20.0, "n": 11}}"#,
    )
    .unwrap();
    assert_eq!(code(&helfrich(dir.path(), &["scan", "--config", "run.json"])), 0);
    let s = json(&dir.path().join("cfg/scan.json"));
    assert_eq!(s["params"]["l1"], 5.0);
    assert_eq!(s["n"], 11);
    assert_eq!(s["critical_radius"], 10.0);
    assert_eq!(code(&helfrich(dir.path(), &["scan", "--config", "run.json", "--l1", "1", "--n", "5", "--out", "flag"])), 0);
    let s = json(&dir.path().join("flag/scan.json"));
    assert_eq!(s["params"]["l1"], 1.0);
    assert_eq!(s["params"]["l2"], -1.0);
    assert_eq!(s["n"], 5);
}

#[test]
fn seeded_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = helfrich(dir.path(), &["gradient-check", "--level", "2", "--primitive", "perturbed-sphere", "--seed", "11", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
    for f in ["gradient-check.csv", "gradient-check.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let other = helfrich(dir.path(), &["gradient-check", "--level", "2", "--primitive", "perturbed-sphere", "--seed", "12", "--out", "c"]);
    assert_eq!(code(&other), 0);
    assert_ne!(fs::read(dir.path().join("a/gradient-check.csv")).unwrap(), fs::read(dir.path().join("c/gradient-check.csv")).unwrap());
}

#[test]
fn mesh_round_trip_and_energy_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = helfrich(dir.path(), &["mesh-make", "--primitive", "icosphere", "--radius", "2", "--level", "3", "--output", "s.off"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("s.off")).unwrap();
    let coord = text.lines().nth(2).unwrap().split(' ').next().unwrap();
    let mantissa = coord.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
    let o = helfrich(dir.path(), &["energy-eval", "--mesh", "s.off", "--l1", "1", "--l2", "-1"]);
    assert_eq!(code(&o), 0);
    let r = json(&dir.path().join("helfrich-out/energy-eval.json"));
    for key in ["area", "volume", "willmore", "helfrich", "lcw", "gap"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    let lcw = r["lcw"].as_f64().unwrap();
    assert!((lcw / (28.0 * std::f64::consts::PI / 3.0) - 1.0).abs() < 2e-2);
}

#[test]
fn residual_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = helfrich(dir.path(), &["residual", "--primitive", "catenoid", "--around", "16", "--along", "8"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("helfrich-out/residual.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "vertex_id,value,area,interior");
    let first = lines.next().unwrap();
    // boundary vertex: no value
    assert!(first.starts_with("0,,") && first.ends_with(",false"), "{first}");
}

#[test]
fn classify_sphere_branch_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let o = helfrich(
        dir.path(),
        &["classify", "--l1", "1", "--l2", "-1", "--rmin", "0.5", "--rmax", "4", "--flow-radius", "2.01", "--flow-rms", "1e-4", "--flow-converged"],
    );
    assert_eq!(code(&o), 0);
    let v = json(&dir.path().join("helfrich-out/classify.json"));
    assert_eq!(v["branch"], "area_positive_volume_negative");
    assert_eq!(v["critical_set"]["radius"], 2.0);
    assert_eq!(v["consistent"], true);
    let o = helfrich(dir.path(), &["classify", "--l1", "0", "--l2", "0.3", "--out", "none"]);
    assert_eq!(code(&o), 0);
    let v = json(&dir.path().join("none/classify.json"));
    assert_eq!(v["critical_set"]["kind"], "none");
    assert!((v["plane_residual"].as_f64().unwrap() + 0.6).abs() < 1e-15);
}

#[test]
fn every_subcommand_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let runs: &[(&[&str], &str)] = &[
        (&["mesh-make", "--primitive", "flat-patch"], "mesh-make"),
        (&["energy-eval", "--surface", "torus", "--nu", "16", "--nv", "16"], "energy-eval"),
        (&["residual", "--surface", "sphere", "--l1", "1", "--l2", "-1"], "residual"),
        (&["gradient-check", "--primitive", "perturbed-sphere", "--level", "2", "--fields", "2"], "gradient-check"),
        (&["variation-check", "--surface", "torus", "--nu", "24", "--nv", "24"], "variation-check"),
        (&["identity-check", "--n-random", "50", "--points", "3"], "identity-check"),
        (&["estimate-report"], "estimate-report"),
        (&["scan"], "scan"),
        (&["classify", "--l1", "1"], "classify"),
        (&["flow", "--max-iters", "2", "--primitive", "perturbed-sphere", "--level", "2", "--radius", "2"], "flow"),
        (&["verify", "--only", "2,4"], "verify"),
    ];
    for (args, name) in runs {
        let o = helfrich(dir.path(), args);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let summary = dir.path().join(format!("helfrich-out/{name}.json"));
        assert!(summary.is_file(), "{name}");
        json(&summary);
        assert!(dir.path().join(format!("helfrich-out/{name}.meta.json")).is_file());
    }
}

#[test]
fn failing_check_is_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // pure Willmore on a near sphere: the assembled gradient is O(1) off at level 2
    let o = helfrich(dir.path(), &["gradient-check", "--primitive", "perturbed-sphere", "--level", "2", "--l1", "0", "--l2", "0", "--tol", "1e-3"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&dir.path().join("helfrich-out/gradient-check.json"))["pass"], false);
}
