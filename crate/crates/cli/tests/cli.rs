use std::path::Path;
use std::process::{Command, Output};

fn guapo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_guapo"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GUAPO_SEED")
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
baseline = "mb-rand-dope"
seed = 5

[budget]
iterations = 1
episodes_per_iteration = 1

[eval]
trials = 2

[env]
horizon = 200
"#;

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = guapo(&["run", "--config", "small.toml", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.csv", "curves.csv", "episodes.jsonl", "config.resolved.toml"] {
        assert!(dir.path().join("o").join(f).exists(), "{f} missing");
    }
    let metrics = std::fs::read_to_string(dir.path().join("o/metrics.csv")).unwrap();
    assert!(metrics.starts_with("baseline,"));
    assert!(metrics.contains("mb-rand-dope"));
}

#[test]
fn replay_matches_written_metrics() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    assert!(guapo(&["run", "--config", "small.toml", "--out", "o"], dir.path()).status.success());
    let out = guapo(&["replay", "--episodes", "o/episodes.jsonl", "--seed", "5"], dir.path());
    assert!(out.status.success());
    let written = std::fs::read(dir.path().join("o/metrics.csv")).unwrap();
    assert_eq!(out.stdout, written);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    assert!(guapo(&["run", "--config", "small.toml", "--seed", "9", "--out", "o"], dir.path()).status.success());
    let resolved = std::fs::read_to_string(dir.path().join("o/config.resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 9"), "{resolved}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = 1\nunknown_key = 3\n").unwrap();
    let out = guapo(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = guapo(&["run", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("neg.toml"), "[env]\nmax_step = -1.0\n").unwrap();
    let out = guapo(&["run", "--config", "neg.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_step"));
    let out = guapo(&["sweep", "--baselines", "guapo,nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = guapo(&["verify"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");
}
