use std::path::Path;
use std::process::{Command, Output};

fn mdn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn mdn")
}

#[test]
fn blind_and_sigma_conflict_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdn(
        &["denoise", "--theta", "t.mdnz", "--input", "a.png", "--output", "b.png", "--blind", "--sigma", "10"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mdn(&["frobnicate"], dir.path()).status.code(), Some(1));
}

#[test]
fn unknown_experiment_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mdn(&["experiment", "nope"], dir.path()).status.code(), Some(1));
}

#[test]
fn missing_checkpoint_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdn(&["gen-toy", "--out", "img", "--count", "1", "--size", "16"], dir.path());
    assert!(out.status.success());
    let out = mdn(
        &["denoise", "--theta", "missing.mdnz", "--input", "img/toy_0000.png", "--output", "o.png"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_training_dir_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    std::fs::write(dir.path().join("c.conf"), "[data]\ntrain = empty\n[pretrain]\nsteps = 1\n").unwrap();
    let out = mdn(&["pretrain", "--config", "c.conf", "--out", "t.mdnz"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.conf"), "[pretrain]\nstepz = 1\n").unwrap();
    let out = mdn(&["pretrain", "--config", "c.conf"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corrupt_then_zero_round_denoise() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(mdn(&["gen-toy", "--out", "img", "--count", "1", "--size", "24"], p).status.success());
    assert!(mdn(&["corrupt", "--input", "img/toy_0000.png", "--output", "n.png", "--sigma", "30"], p).status.success());
    std::fs::write(p.join("c.conf"), "arch = dncnn-d2-c2-k3-ch1\n[data]\ntrain = img\n[pretrain]\nsteps = 2\nbatch = 1\npatch = 8\n").unwrap();
    let out = mdn(&["pretrain", "--config", "c.conf", "--out", "t.mdnz"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mdn(&["denoise", "--theta", "t.mdnz", "--input", "n.png", "--output", "d.png", "--iters", "0"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(p.join("d.png").exists());
}

#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["desk.conf", "full.conf"] {
        let cfg = mdn_harness::config::ExperimentConfig::load(&root.join(name)).unwrap();
        cfg.validate().unwrap();
    }
}
