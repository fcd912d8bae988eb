use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], config: &str, out: &Path) -> Output {
    let dir = out.parent().unwrap();
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_resolvent-lab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .env_remove("RESOLVENT_LAB_OUT")
        .output()
        .unwrap()
}

const SMALL: &str = r#"
samples = 200
epsilons = [0.5]

[space]
p = 2
dim = 2

[operator]
name = "rotation"

[sequence]
n_max = 200
"#;

#[test]
fn all_writes_every_file_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["all"], SMALL, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    for f in ["moduli.csv", "curve.csv", "metastab.csv", "audit.csv", "summary.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("status: ok"));
}

#[test]
fn single_subcommand_writes_only_its_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["moduli"], SMALL, &out);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("moduli.csv").exists());
    assert!(!out.join("curve.csv").exists());
}

#[test]
fn invalid_config_exits_two_with_field_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["all"], &SMALL.replace("p = 2", "p = 1"), &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p must exceed 1"));
    assert!(!out.exists());
}

#[test]
fn unknown_operator_lists_names() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["curve"],
        &SMALL.replace("rotation", "spiral"),
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("spiral") && err.contains("clip_contraction"), "{err}");
}

#[test]
fn missing_metastable_index_exits_one() {
    // A curve of 3 points cannot host a window of length 2·N+3 past N = 0.
    let cfg = SMALL.replace("n_max = 200", "n_max = 3").replace(
        "epsilons = [0.5]",
        "epsilons = [1e-6]\ncounterfunctions = [\"affine:2:3\"]",
    );
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["metastab"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("metastab.csv")).unwrap();
    assert!(csv.contains("not_found"), "{csv}");
}

#[test]
fn seed_flag_overrides_config_and_stays_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["audit", "--seed", "11"], SMALL, &a).status.code(), Some(0));
    assert_eq!(run(&["audit", "--seed", "11"], SMALL, &b).status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("audit.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn underflowing_moduli_are_marked() {
    let cfg = SMALL
        .replace("p = 2", "p = 3")
        .replace("epsilons = [0.5]", "epsilons = [0.01]");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["moduli"], &cfg, &out).status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("moduli.csv")).unwrap();
    assert!(
        csv.lines().any(|l| l.starts_with("nu1,") && l.contains(",underflow,")),
        "{csv}"
    );
    assert!(!csv.contains(",0e0,"));
}
