use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use harmconf::cli::{DiagnosticsEntry, MinAreaEntry};
use harmconf::invariants::InvariantSet;
use harmconf::masschecks::InequalityReport;
use harmconf::profile::PropertyReport;

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_harmconf"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn config(command: &str, areas: &[f64], caps: &[f64]) -> String {
    serde_json::json!({
        "geometry": {"n": 3, "kind": "flat_exterior", "r0": 1.0},
        "command": command,
        "A_values": areas,
        "C_schedule": caps,
        "L_max": 2,
        "seed": 4
    })
    .to_string()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn invariants_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &config("invariants", &[], &[]));
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let inv: InvariantSet =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/invariants.json")).unwrap()).unwrap();
    assert!((inv.i1 + 2.0).abs() < 1e-6 && (inv.i2 - 2.0).abs() < 1e-6);
    assert!((inv.capacity - 1.0).abs() < 1e-9 && inv.adm_mass_base == 0.0);
}

#[test]
fn mu_and_checks_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &config("mu", &[4.0 * PI, 64.0 * PI, 256.0 * PI], &[]));
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/mu_profile.csv")).unwrap();
    let formula = column(&csv, "mu_formula");
    let direct = column(&csv, "mu_direct");
    for (f, e) in formula.iter().zip([0.0, 2.0, -2.0 + 2.0 * 8f64.sqrt()]) {
        assert!((f - e).abs() < 1e-10);
    }
    for (f, d) in formula.iter().zip(&direct) {
        assert!((f - d).abs() < 1e-3);
    }
    let out = run(&cfg, &dir.path().join("out"), &["--command", "checks"]);
    assert_eq!(out.status.code(), Some(0));
    let reports: Vec<InequalityReport> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/checks.json")).unwrap()).unwrap();
    assert_eq!(reports[0].name, "I1_plus_I2");
    assert!(reports.iter().all(|r| !r.applicable || r.satisfied));
}

#[test]
fn minarea_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &config("minarea", &[4.0 * PI, 256.0 * PI], &[]));
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let entries: Vec<MinAreaEntry> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/minarea.json")).unwrap()).unwrap();
    for e in &entries {
        let oracle = e.oracle.unwrap();
        assert!((e.radial_area - oracle).abs() < 1e-6 * oracle);
        assert!((e.graph_area.unwrap() - oracle).abs() < 1e-4 * oracle);
    }
}

#[test]
fn alpha_command_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &config("alpha", &[4.0 * PI, 64.0 * PI, 256.0 * PI], &[2.0, 4.0, 8.0]));
    let a = run(&cfg, &dir.path().join("a"), &[]);
    let b = run(&cfg, &dir.path().join("b"), &[]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    for name in ["alpha_profile.csv", "alpha_properties.json", "counterexamples.json", "alpha_diagnostics.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
    let csv = fs::read_to_string(dir.path().join("a/alpha_profile.csv")).unwrap();
    for (a, v) in column(&csv, "A").iter().zip(column(&csv, "alpha_C")) {
        if *a <= 64.0 * PI * (1.0 + 1e-12) {
            assert!((v - a).abs() < 1e-6 * a);
        }
    }
    let report: PropertyReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/alpha_properties.json")).unwrap()).unwrap();
    assert!(report.all_pass());
    let diag: Vec<DiagnosticsEntry> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/alpha_diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag.len(), 3);
}

#[test]
fn invalid_configs_exit_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (config("mu", &[4.0 * PI, 1.0], &[]), "A_values"),
        (config("alpha", &[4.0 * PI], &[4.0, 2.0]), "C_schedule"),
        (config("mu", &[], &[]), "A_values"),
        (
            r#"{"geometry": {"n": 9, "kind": "flat_exterior", "r0": 1.0}, "command": "invariants"}"#.to_string(),
            "geometry",
        ),
        (
            r#"{"geometry": {"n": 3, "kind": "flat_exterior", "r0": 1.0}, "command": "invariants", "bogus": 1}"#
                .to_string(),
            "bogus",
        ),
    ];
    for (body, field) in cases {
        let cfg = write_config(dir.path(), &body);
        let out = run(&cfg, &dir.path().join("out"), &[]);
        assert_eq!(out.status.code(), Some(1), "{body}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{field}: {err}");
    }
    let out = run(&dir.path().join("missing.json"), &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
}
