use std::path::Path;
use std::process::{Command, Output};

fn sau(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sau"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("spawn sau")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const MINIMAL: &str = r#"
seed = 7
trials = 3
horizon = 50

[env]
kind = "bernoulli"
arms = 3
mu_best = 0.6
eps_gap = 0.2

[[policy]]
kind = "sau-sampling"

[[policy]]
kind = "ucb1"
"#;

#[test]
fn minimal_run_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", MINIMAL);
    let out = sau(dir.path(), &["run", "--config", "exp.toml", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("res/sau-sampling.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 51);
    assert_eq!(lines[0], "step,mean_cum_regret,sem,policy,env");
    assert!(lines[1].starts_with("1,"));
    assert!(dir.path().join("res/ucb1.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", MINIMAL);
    assert!(sau(dir.path(), &["run", "--config", "exp.toml", "--out", "a"]).status.success());
    assert!(sau(dir.path(), &["run", "--config", "exp.toml", "--out", "b", "--jobs", "3"]).status.success());
    for f in ["sau-sampling.csv", "ucb1.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn horizon_below_arm_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", &MINIMAL.replace("horizon = 50", "horizon = 2"));
    let out = sau(dir.path(), &["run", "--config", "exp.toml", "--out", "res"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", &MINIMAL.replace("seed = 7", "seed = 7\nhorizn = 5"));
    let out = sau(dir.path(), &["run", "--config", "exp.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizn"));
}

#[test]
fn prop_check_two_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sau(dir.path(), &["prop-check", "2", "--trials", "4000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn prop_check_four_rejects_singular_design() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..20).map(|i| format!("{i},{}\n", 2 * i)).collect();
    write(dir.path(), "design.csv", &rows);
    let out = sau(dir.path(), &["prop-check", "4", "--design", "design.csv", "--trials", "100"]);
    assert_ne!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn compare_ranks_oracle_first_and_breaks_ties_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
trials = 2
horizon = 40

[env]
kind = "bernoulli"
arms = 4
mu_best = 0.5
eps_gap = 0.0

[[policy]]
kind = "uniform"

[[policy]]
kind = "oracle"

[[policy]]
kind = "sau-ucb"
"#;
    write(dir.path(), "tie.toml", cfg);
    let out = sau(dir.path(), &["compare", "--config", "tie.toml", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ranking: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/ranking.json")).unwrap()).unwrap();
    let names: Vec<&str> = ranking.as_array().unwrap().iter().map(|r| r["policy"].as_str().unwrap()).collect();
    // Zero gap: every policy has zero regret, so the order is alphabetical.
    assert_eq!(names, ["oracle", "sau-ucb", "uniform"]);

    let gap = cfg.replace("eps_gap = 0.0", "eps_gap = 0.1");
    write(dir.path(), "gap.toml", &gap);
    let out = sau(dir.path(), &["compare", "--config", "gap.toml", "--out", "res2"]);
    assert!(out.status.success());
    let ranking: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res2/ranking.json")).unwrap()).unwrap();
    let names: Vec<&str> = ranking.as_array().unwrap().iter().map(|r| r["policy"].as_str().unwrap()).collect();
    assert_eq!(names[0], "oracle");
    assert_eq!(names.last(), Some(&"uniform"));
}

#[test]
fn reproduce_lists_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = sau(dir.path(), &["reproduce", "--list"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l == "figure1-a"));
}
