use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hgac"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn short_run_writes_all_artifacts() {
    let root = tmp("short");
    let status = bin()
        .args(["run", "--scenario", "cn_small", "--episodes", "10", "--seed", "3", "--deterministic"])
        .env("HGAC_OUT_DIR", &root)
        .status()
        .unwrap();
    assert!(status.success());
    let dir = root.join("cn_small_hgac_s3");
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "episode,team_return,agent_0_return,agent_1_return,critic_loss,actor_loss,entropy,seconds"
    );
    assert_eq!(lines.count(), 10);
    for f in ["checkpoint.bin", "checkpoint.json", "curve.svg", "manifest.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    assert!(dir.join("heatmaps").join("final_head0.csv").is_file());
}

#[test]
fn scenario_file_is_accepted() {
    let out = tmp("file");
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/ctc_small.json");
    let status = bin()
        .args(["run", "--scenario", cfg, "--algo", "hgac-con", "--episodes", "2", "--deterministic", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("metrics.csv").is_file());
}

#[test]
fn unknown_scenario_fails_cleanly() {
    let out = bin()
        .args(["run", "--scenario", "no_such_scenario", "--episodes", "1"])
        .env("HGAC_OUT_DIR", tmp("bad"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn static_ablation_needs_groups() {
    let out = bin()
        .args(["run", "--scenario", "cn_small", "--algo", "hgac-con", "--episodes", "1"])
        .env("HGAC_OUT_DIR", tmp("nogroups"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}
