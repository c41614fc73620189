use std::path::PathBuf;
use std::process::Command;

fn barron() -> Command {
    Command::new(env!("CARGO_BIN_EXE_barron"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn verify_prints_json_and_exits_zero() {
    let out = barron().args(["verify", "integral"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["suite"], "integral");
    assert_eq!(report["checks"].as_array().unwrap().len(), 12);
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = barron().args(["verify", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_seed_is_a_usage_error_naming_the_field() {
    let target = configs().join("five_atoms.json");
    let out = barron()
        .args(["sweep", "--target", target.to_str().unwrap(), "--s", "0.5", "--sweep", "16,32"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn config_file_and_flags_agree() {
    let dir = std::env::temp_dir().join(format!("barron-bin-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let target = configs().join("constant.json");
    let config = dir.join("sweep.json");
    std::fs::write(
        &config,
        serde_json::json!({"target": target, "s": 0.5, "sweep": [16, 32, 64], "p": [2], "seed": 5}).to_string(),
    )
    .unwrap();
    let a = barron().args(["sweep", "--config", config.to_str().unwrap()]).output().unwrap();
    let b = barron()
        .args(["sweep", "--target", target.to_str().unwrap(), "--s", "0.5", "--sweep", "16,32,64", "--p", "2", "--seed", "5"])
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let csv = String::from_utf8(a.stdout).unwrap();
    assert!(csv.lines().last().unwrap().contains("fit-saturated"));
}

#[test]
fn failed_slope_expectation_exits_one() {
    let target = configs().join("five_atoms.json");
    let out = barron()
        .args([
            "sweep", "--target", target.to_str().unwrap(), "--s", "0.5", "--arch", "deep", "--sweep", "16,32,64,128",
            "--seed", "1", "--expect-slope", "-5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lowerbound_report_passes() {
    let out = barron().args(["lowerbound", "--L", "1", "--N", "2", "--s", "0.25", "--seed", "3", "--networks", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n"], 16);
    assert_eq!(report["pass"], true);
}
