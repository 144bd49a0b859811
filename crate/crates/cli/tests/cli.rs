use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const COSX: &str = r#"{"dim":1,"coeffs":[{"q":[1],"re":0.5,"im":0},{"q":[-1],"re":0.5,"im":0}]}"#;
const ZERO: &str = r#"{"dim":1,"coeffs":[]}"#;

fn torhom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torhom"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("cosx.json"), COSX).unwrap();
    fs::write(dir.path().join("zero.json"), ZERO).unwrap();
    dir
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn free_spectrum() {
    let dir = workspace();
    let out = torhom(dir.path(), &["spectrum", "--potential", "zero.json", "--hbar", "1", "--K", "2", "--out", "o"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("o/spectrum.csv")).unwrap();
    let eig: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(eig, vec![0.0, 0.5, 0.5, 2.0, 2.0]);
    let manifest = read_json(&dir.path().join("o/manifest.json"));
    assert_eq!(manifest["subcommand"], "spectrum");
    assert_eq!(manifest["inputs_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn closed_form_effective_has_the_plateau() {
    let dir = workspace();
    let out = torhom(
        dir.path(),
        &["effective", "--potential", "cosx.json", "--method", "closed-form", "--pmax", "3", "--dp", "0.25", "--out", "o"],
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("o/effective.csv")).unwrap();
    assert!(csv.starts_with("P,Hbar,method,residual\n"));
    let plateau = 4.0 / std::f64::consts::PI;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (p, h): (f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        if p.abs() <= plateau {
            assert!((h - 1.0).abs() < 1e-12, "{line}");
        } else {
            assert!(h > 1.0);
        }
    }
    assert_eq!(read_json(&dir.path().join("o/certificates.json"))["hold"], true);
}

#[test]
fn translation_pair_passes() {
    let dir = workspace();
    let out = torhom(dir.path(), &["isospectral-check", "--pair", "cosx.json:translate=pi", "--hbar", "1,0.5,0.25", "--out", "o"]);
    assert!(out.status.success());
    let rep = read_json(&dir.path().join("o/theorem2.json"));
    assert_eq!(rep["verdict"], "pass");
    assert!(rep["sampling_note"].as_str().unwrap().contains("0.25"));
}

#[test]
fn user_pair_that_is_not_isospectral_fails() {
    let dir = workspace();
    let scaled = COSX.replace("0.5", "0.55");
    fs::write(dir.path().join("scaled.json"), scaled).unwrap();
    let out = torhom(dir.path(), &["isospectral-check", "--pair", "cosx.json:scaled.json", "--hbar", "1", "--out", "o"]);
    assert!(out.status.success());
    let rep = read_json(&dir.path().join("o/theorem2.json"));
    assert_eq!(rep["verdict"], "fail");
    assert_eq!(rep["hypothesis"], "unverified");
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = workspace();
    for o in ["a", "b"] {
        let out = torhom(dir.path(), &["bs-reconstruct", "--potential", "cosx.json", "--hbar", "0.1", "--out", o]);
        assert!(out.status.success());
        let out = torhom(dir.path(), &["cell-solve", "--potential", "cosx.json", "--p", "1.5", "--out", o]);
        assert!(out.status.success());
    }
    for f in ["bs.csv", "corrector.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty() && a == b, "{f}");
    }
    let bs = fs::read_to_string(dir.path().join("a/bs.csv")).unwrap();
    assert!(bs.starts_with("ell,P,E,Hbar_closed_form,misfit\n"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = workspace();
    fs::write(
        dir.path().join("run.json"),
        r#"{"potential": "zero.json", "hbar": [0.5], "K": 3, "out": "from_config"}"#,
    )
    .unwrap();
    let out = torhom(dir.path(), &["spectrum", "--config", "run.json", "--K", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("from_config/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    assert!(csv.contains("5.000000000000e-01,1,"));
}

#[test]
fn failures_emit_error_json_and_exit_codes() {
    let dir = workspace();
    let out = torhom(dir.path(), &["frobnicate", "--out", "u"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(read_json(&dir.path().join("u/error.json"))["kind"], "validation");

    let out = torhom(dir.path(), &["spectrum", "--potential", "zero.json", "--hbar", "1.5", "--out", "v"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("v/error.json").exists());

    let out = torhom(dir.path(), &["spectrum", "--potential", "missing.json", "--out", "w"]);
    assert_eq!(out.status.code(), Some(2));

    let out = torhom(dir.path(), &["egorov", "--potential", "cosx.json", "--hbar", "0.2,0.1,0.05,0.025", "--K", "8", "--step", "0.05", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));

    // the cell problem rejects grids below 32 nodes
    let out = torhom(dir.path(), &["cell-solve", "--potential", "cosx.json", "--grid", "8", "--out", "y"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(read_json(&dir.path().join("y/error.json"))["exit_code"], 2);
}

#[test]
fn egorov_and_weyl_count_reports() {
    let dir = workspace();
    let out = torhom(dir.path(), &["egorov", "--potential", "zero.json", "--hbar", "0.4,0.3,0.2,0.1", "--K", "12", "--out", "e"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&dir.path().join("e/egorov.json"));
    assert_eq!(rep["exact"], true);
    assert!(rep["slope"].is_null());

    let out = torhom(dir.path(), &["weyl-count", "--potential", "cosx.json", "--energy", "2", "--hbar", "0.2,0.1,0.05", "--out", "w"]);
    assert!(out.status.success());
    let rep = read_json(&dir.path().join("w/weyl_count.json"));
    assert!(rep["remainder_constant"].as_f64().unwrap() <= 20.0);
    assert!(rep["first_invariant"].as_f64().is_some());
}
