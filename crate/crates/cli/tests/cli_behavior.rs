//! End-to-end behavior of the `fctl` binary: config validation, output
//! determinism, and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn fctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fctl"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fctl_test_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn all_bundled_configs_parse_and_analyze() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let is_network = text.contains("\"network\"");
        let mode = if is_network { "analyze-network" } else { "analyze-single" };
        let out = tmp_dir(path.file_stem().unwrap().to_str().unwrap());
        let status = fctl()
            .args(["--config", path.to_str().unwrap(), "--mode", mode, "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success(), "{} failed to analyze", path.display());
    }
}

#[test]
fn schema_errors_are_rejected() {
    let dir = tmp_dir("schema");
    std::fs::create_dir_all(&dir).unwrap();

    // empty scenario list
    let bad = dir.join("empty_scenarios.json");
    std::fs::write(
        &bad,
        r#"{"schema_version":1,"kind":"single","name":"bad","plan":{"green":2,"red":2},"arrivals":{"scenarios":[]}}"#,
    )
    .unwrap();
    let out = fctl()
        .args(["--config", bad.to_str().unwrap(), "--mode", "analyze-single", "--out", dir.join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario"));

    // weights off by more than 1e-12
    let bad = dir.join("bad_weights.json");
    std::fs::write(
        &bad,
        r#"{"schema_version":1,"kind":"single","name":"bad","plan":{"green":2,"red":2},
            "arrivals":{"scenarios":[
              {"weight":"0.6","slots":[{"shift":0},{"shift":0},{"shift":0},{"shift":0}]},
              {"weight":"0.5","slots":[{"shift":1},{"shift":0},{"shift":0},{"shift":0}]}]}}"#,
    )
    .unwrap();
    let out = fctl()
        .args(["--config", bad.to_str().unwrap(), "--mode", "analyze-single", "--out", dir.join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights sum"));

    // unknown field
    let bad = dir.join("unknown_field.json");
    std::fs::write(
        &bad,
        r#"{"schema_version":1,"kind":"single","name":"bad","plan":{"green":2,"red":2},
            "arrivals":{"poisson":{"rate":"0.1"}},"typo_field":3}"#,
    )
    .unwrap();
    let out = fctl()
        .args(["--config", bad.to_str().unwrap(), "--mode", "analyze-single", "--out", dir.join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    // wrong schema version
    let bad = dir.join("bad_version.json");
    std::fs::write(
        &bad,
        r#"{"schema_version":99,"kind":"single","name":"bad","plan":{"green":2,"red":2},
            "arrivals":{"poisson":{"rate":"0.1"}}}"#,
    )
    .unwrap();
    let out = fctl()
        .args(["--config", bad.to_str().unwrap(), "--mode", "analyze-single", "--out", dir.join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unstable_config_exits_2() {
    let dir = tmp_dir("unstable");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("unstable.json");
    std::fs::write(
        &bad,
        r#"{"schema_version":1,"kind":"single","name":"unstable","plan":{"green":2,"red":2},
            "arrivals":{"poisson":{"rate":"0.6"}}}"#,
    )
    .unwrap();
    let out = fctl()
        .args(["--config", bad.to_str().unwrap(), "--mode", "analyze-single", "--out", dir.join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unstable"));
}

#[test]
fn analyze_output_is_byte_deterministic() {
    let cfg = configs().join("motivating_example.json");
    let out_a = tmp_dir("det_a");
    let out_b = tmp_dir("det_b");
    for out in [&out_a, &out_b] {
        let status = fctl()
            .args(["--config", cfg.to_str().unwrap(), "--mode", "analyze-single", "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in ["means_motivating_example.csv", "tails_motivating_example.csv", "greendist_motivating_example.csv"] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn allzero_analyze_writes_zero_csvs() {
    let cfg = configs().join("allzero.json");
    let out = tmp_dir("allzero");
    let status = fctl()
        .args(["--config", cfg.to_str().unwrap(), "--mode", "analyze-single", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let means = std::fs::read_to_string(out.join("means_allzero.csv")).unwrap();
    for line in means.lines().filter(|l| !l.starts_with('#') && !l.starts_with("slot")) {
        let mean: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(mean, 0.0);
    }
    let tails = std::fs::read_to_string(out.join("tails_allzero.csv")).unwrap();
    for line in tails.lines().filter(|l| !l.starts_with('#') && !l.starts_with("queue_at")) {
        for v in line.split(',').skip(1) {
            let p: f64 = v.parse().unwrap();
            assert!(p.abs() < 1e-9);
        }
    }
}

#[test]
fn compare_mode_exits_clean_within_sigma() {
    let cfg = configs().join("iid_poisson_rho09.json");
    let out = tmp_dir("compare");
    let output = fctl()
        .args([
            "--config", cfg.to_str().unwrap(),
            "--mode", "compare",
            "--out", out.to_str().unwrap(),
            "--cycles", "50000",
            "--replications", "3",
            "--seed", "424242",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "compare failed: {}",
        String::from_utf8_lossy(&output.stdout)
    );
    assert!(out.join("compare_iid_poisson_rho09.csv").exists());
}

#[test]
fn simulation_respects_seed_override() {
    let cfg = configs().join("allzero.json");
    let out = tmp_dir("simseed");
    let status = fctl()
        .args([
            "--config", cfg.to_str().unwrap(),
            "--mode", "simulate-single",
            "--out", out.to_str().unwrap(),
            "--cycles", "100",
            "--replications", "2",
            "--seed", "5",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let means = std::fs::read_to_string(out.join("means_allzero.csv")).unwrap();
    assert!(means.contains("# seed 5"));
}
