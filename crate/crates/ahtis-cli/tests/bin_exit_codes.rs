//! Exit-code contract of the `ahtis` binary: 0 success, 2 config error,
//! 3 runtime error.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ahtis"))
}

#[test]
fn missing_config_exits_2() {
    let out = bin()
        .args(["run", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_amis_nu_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        format!(
            r#"
experiment = "synthetic"

[synthetic]
dims = [2]
nu_pi = 2.0

[[method]]
kind = "amis"
nu = 1.5

[run]
iterations = 2
samples = [100]
replications = 1
base_seed = 1
out_dir = "{}"
"#,
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let out = bin().args(["run"]).arg(&cfg).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn smoke_run_exits_0_and_aggregate_works() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = dir.path().join("ok.toml");
    fs::write(
        &cfg,
        format!(
            r#"
experiment = "synthetic"

[synthetic]
dims = [2]
nu_pi = 5.0

[[method]]
kind = "ahtis"
nu = 5.0

[run]
iterations = 2
samples = [100]
replications = 2
base_seed = 3
out_dir = "{}"
workers = 1
"#,
            out_dir.display()
        ),
    )
    .unwrap();
    let out = bin().args(["run"]).arg(&cfg).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("summary.csv").exists());

    let before = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let agg = bin().args(["aggregate"]).arg(&out_dir).output().unwrap();
    assert_eq!(agg.status.code(), Some(0));
    assert_eq!(
        before,
        fs::read_to_string(out_dir.join("summary.csv")).unwrap()
    );

    // seed override changes the outputs
    let out2_dir = dir.path().join("out2");
    let out2 = bin()
        .args(["run"])
        .arg(&cfg)
        .args(["--seed", "4"])
        .arg("--out")
        .arg(&out2_dir)
        .output()
        .unwrap();
    assert_eq!(out2.status.code(), Some(0));
    let a = fs::read_to_string(out_dir.join("raw_ahtis-nu5_d2_m100_r0000.csv")).unwrap();
    let b = fs::read_to_string(out2_dir.join("raw_ahtis-nu5_d2_m100_r0000.csv")).unwrap();
    assert_ne!(a, b);
}
