use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bdssep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdssep")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn stationary_report_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nn = [5, 6]\nalpha = 0.2\nbeta = 0.7\n");
    let out = dir.path().join("out");
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let o = bdssep(&["stationary", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        bytes.push((fs::read(out.join("stationary.json")).unwrap(), fs::read(out.join("stationary_densities.csv")).unwrap()));
        fs::remove_dir_all(&out).unwrap();
    }
    assert_eq!(bytes[0], bytes[1]);
    let report: serde_json::Value = serde_json::from_slice(&bytes[0].0).unwrap();
    let prov = &report["provenance"];
    assert_eq!(prov["config_hash"].as_str().unwrap().len(), 64);
    assert!(prov["defaulted"].as_array().unwrap().iter().any(|f| f == "set.radius"));
    assert!(prov["crate_version"].is_string());
}

#[test]
fn seed_override_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let read_hash = |seed: &str| {
        let out = dir.path().join(seed);
        let o = bdssep(&["stationary", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("stationary.json")).unwrap()).unwrap();
        report["provenance"]["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(read_hash("1"), read_hash("2"));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nalpha = 1.5\n");
    let o = bdssep(&["stationary", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.alpha"));

    let cfg = write_config(dir.path(), "[model]\nalpah = 0.5\n");
    let o = bdssep(&["stationary", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpah"));
}

#[test]
fn state_space_cap_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nn = [12]\n");
    let o = bdssep(&["stationary", "--config", &cfg, "--cap", "100", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("100") && err.contains("--cap"), "{err}");
}

#[test]
fn ball_around_the_stationary_profile_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nn = [6]\n[set]\ncenter = \"constant(0.3)\"\n");
    let o = bdssep(&["scaling", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("set.center"));
}

#[test]
fn verify_creates_missing_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[verify]\ncriteria = [1, 2]\n");
    let out = dir.path().join("deep").join("nested");
    let o = bdssep(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("criterion  1 PASS") && stdout.contains("criterion  2 PASS"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["passed"], true);
}

#[test]
fn perturbed_tolerance_fails_the_named_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[verify]\ncriteria = [1, 5]\n");
    let o = bdssep(&["verify", "--config", &cfg, "--perturb", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("criterion  1 PASS"), "{stdout}");
    assert!(stdout.contains("criterion  5 FAIL hitting CDF bound"), "{stdout}");
}

#[test]
fn seeded_parallel_report_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nalpha = 0.2\nbeta = 0.8\n[hydro]\nn = 16\nreplicas = 40\nn_x = 64\nn_t = 200\nwindow = 1\n",
    );
    let out = dir.path().join("out");
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let o = bdssep(&["hydro", "--config", &cfg, "--seed", "9", "--workers", "3", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        bytes.push(fs::read(out.join("hydro.json")).unwrap());
        fs::remove_dir_all(&out).unwrap();
    }
    assert_eq!(bytes[0], bytes[1]);
    let report: serde_json::Value = serde_json::from_slice(&bytes[0]).unwrap();
    assert!(!report["provenance"]["seeds"].as_object().unwrap().is_empty());
}
