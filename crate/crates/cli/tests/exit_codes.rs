mod common;

use common::{run, run_ok};

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["synth", "--lr", "-1"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["synth", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["synth", "--seed"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["evaluate", "--protocol", "bogus"]).status.code(), Some(2));
}

#[test]
fn config_inconsistencies_fail_before_training() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["synth", "--pairs", "20", "--output", "data"]);
    let out = run(dir.path(), &["train", "--data", "data", "--output", "m", "--encoder-id", "mert"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mert"));
    assert!(!dir.path().join("m/training_log.json").exists());
    let out = run(dir.path(), &["train", "--data", "data", "--output", "m", "--architecture", "cnn"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["evaluate", "--data", "data", "--protocol", "ablation", "--target", "gen-z"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["train", "--data", "missing"]).status.code(), Some(3));
    assert_eq!(
        run(dir.path(), &["audit", "--checkpoint", "none.ckpt", "a.maud", "b.maud"]).status.code(),
        Some(3)
    );
    assert_eq!(run(dir.path(), &["synth", "--config", "absent.toml"]).status.code(), Some(3));
    std::fs::write(dir.path().join("blocker"), b"").unwrap();
    assert_eq!(
        run(dir.path(), &["synth", "--pairs", "5", "--output", "blocker/sub"]).status.code(),
        Some(3)
    );
}

#[test]
fn divergent_training_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["synth", "--pairs", "30", "--output", "data"]);
    let out = run(dir.path(), &["train", "--data", "data", "--output", "m", "--lr", "1e300"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(dir.path(), &["--help"]);
    assert!(out.contains("synth") && out.contains("audit"));
}
