use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wssfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wssfem"))
        .args(args)
        .env_remove("WSSFEM_WORKERS")
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn help_lists_subcommands() {
    let out = wssfem(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["convergence", "solve", "wss", "mesh"] {
        assert!(text.contains(cmd), "{text}");
    }
}

#[test]
fn usage_errors_are_json_with_exit_code_2() {
    let out = wssfem(&["convergence", "--element", "p3p2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "usage");
}

#[test]
fn convergence_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = wssfem(&[
        "convergence", "--case", "stokes2d", "--element", "p2p1", "--levels", "0..1", "--wss", "cg1,dg0",
        "--format", "csv,json,plotdata", "--out", out_dir,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["levels"], 2);
    let rate = summary["rates"]["v"].as_f64().unwrap();
    assert!((rate - 3.0).abs() < 0.3);
    for name in ["stokes2d_p2p1.csv", "stokes2d_p2p1.json", "stokes2d_p2p1_wss_cg1.dat", "stokes2d_p2p1_wss_dg0.dat"] {
        assert!(Path::new(out_dir).join(name).is_file(), "{name}");
    }
    let csv = std::fs::read_to_string(Path::new(out_dir).join("stokes2d_p2p1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn failed_study_reports_json_and_writes_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = wssfem(&["convergence", "--levels", "2", "--format", "json", "--out", out_dir]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "invalid_argument");
    assert!(err["message"].as_str().unwrap().contains("at least 2 levels"));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(out_dir).join("stokes2d_p2p1.json")).unwrap()).unwrap();
    assert_eq!(report["complete"], false);
}

#[test]
fn generated_mesh_solves_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = wssfem(&["mesh", "--case", "poiseuille3d", "--level", "0", "--out", out_dir]);
    assert!(out.status.success());
    let summary = stdout_json(&out);
    assert_eq!(summary["dim"], 3);
    let file = summary["file"].as_str().unwrap().to_string();

    let from_file = wssfem(&[
        "solve", "--case", "poiseuille3d", "--element", "p1p1", "--mesh", &file, "--tags", "1=inlet,2=outlet,3=wall",
        "--wss", "bflux",
    ]);
    let generated = wssfem(&["solve", "--case", "poiseuille3d", "--element", "p1p1", "--level", "0", "--wss", "bflux"]);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let (a, b) = (stdout_json(&from_file), stdout_json(&generated));
    assert_eq!(a["target_edge"], Value::Null);
    let (ea, eb) = (a["err_v"].as_f64().unwrap(), b["err_v"].as_f64().unwrap());
    assert!((ea - eb).abs() <= 1e-8 * eb);
}

#[test]
fn wss_subcommand_exports_fields_and_lsa() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = wssfem(&[
        "wss", "--case", "poiseuille3d", "--element", "p2p1", "--wss", "dg0", "--lsa-reference", "8", "--out", out_dir,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    let entry = &summary["wss"]["dg0"];
    let avg = entry["stats"]["avg"].as_f64().unwrap();
    assert!((avg - 8.0).abs() < 1.0, "{avg}");
    assert_eq!(entry["lsa_percent"], 0.0);
    for ext in ["vtu", "csv"] {
        assert!(Path::new(out_dir).join(format!("poiseuille3d_p2p1_wss_dg0.{ext}")).is_file());
    }
}

#[test]
fn unreadable_mesh_is_a_json_error() {
    let out = wssfem(&["solve", "--mesh", "/nonexistent/mesh.msh"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_json(&out)["kind"].is_string());
}
