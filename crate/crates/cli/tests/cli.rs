use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn herzhaus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herzhaus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn verify_reports_every_atom() {
    for (name, rows) in [
        ("hardy_hardy.json", 10),
        ("rough_power.json", 10),
        ("rough_shift.json", 3),
        ("matrix_power.json", 3),
    ] {
        let out = herzhaus(&["verify", "--config", &config(name)]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report = stdout_json(&out);
        assert_eq!(report["rows"].as_array().unwrap().len(), rows, "{name}");
        assert_eq!(report["aggregate"]["all_certified"], true, "{name}");
    }
}

#[test]
fn failing_gate_exits_two_with_no_rows() {
    let text = std::fs::read_to_string(configs().join("rough_shift.json")).unwrap();
    let mut cfg: Value = serde_json::from_str(&text).unwrap();
    cfg["params"]["q_star"] = 1.21.into();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = herzhaus(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report = stdout_json(&out);
    assert!(report["rows"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("index_balance"));
}

#[test]
fn csv_output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = herzhaus(&[
        "verify",
        "--config",
        &config("rough_shift.json"),
        "--csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("atom_id,j_a,"), "{header}");
    assert_eq!(lines.count(), 3);
}

#[test]
fn constants_lists_families_and_gates() {
    let out = herzhaus(&["constants", "--config", &config("rough_power.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["constants"]["C1"].as_f64().unwrap() > 0.0);
    assert!(!v["gates"].as_array().unwrap().is_empty());
}

#[test]
fn herz_norm_of_unit_annulus() {
    let out = herzhaus(&[
        "herz-norm",
        "--function",
        &config("annulus.json"),
        "--params",
        &config("herz_params.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    // ‖χ_{1/2 < |x| <= 1}‖_{L^2(R)} = 1 times |B_0|^{α/n} = 2^{1/2}
    let v = stdout_json(&out);
    let norm = v["value"].as_f64().unwrap();
    assert!((norm - 2f64.sqrt()).abs() < 1e-10, "{norm}");
}

#[test]
fn atom_make_then_validate() {
    let params = config("herz_params.json");
    let out = herzhaus(&["atom", "make", "--params", &params, "--j-a", "-1", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("atom.json");
    std::fs::write(&path, &out.stdout).unwrap();
    let out = herzhaus(&[
        "atom",
        "validate",
        "--params",
        &params,
        "--atom",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(stdout_json(&out)["passed"], true);
}

#[test]
fn decompose_prints_certified_pieces() {
    let out = herzhaus(&["decompose", "--config", &config("matrix_power.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let atoms = stdout_json(&out);
    assert_eq!(atoms.as_array().unwrap().len(), 3);
    for atom in atoms.as_array().unwrap() {
        for piece in atom["pieces"].as_array().unwrap() {
            assert_eq!(piece["certification"]["passed"], true);
        }
    }
}

#[test]
fn missing_config_is_an_error() {
    let out = herzhaus(&["verify", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}
