use std::path::Path;
use std::process::{Command, Output};

fn ssvr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssvr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CONFIG: &str = r#"
T = 200
seeds = [1, 2]
metrics_every = 20
output_path = "from_config"
[problem]
name = "noisy_quadratic"
d = 5
sigma = 0.5
[algorithm]
name = "ssvr"
preset = "theorem1"
[sweep]
T_grid = [50, 100, 200]
"#;

#[test]
fn presets_prints_theorem1_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssvr(&["presets", "--t", "1000", "--d", "100"], dir.path());
    assert!(o.status.success());
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("theorem1"))
        .unwrap()
        .to_string();
    assert!(
        line.contains("eta=1e-3")
            && line.contains("beta=0.01")
            && line.contains("B0=10")
            && line.contains("B1=1"),
        "{line}"
    );
    let o = ssvr(
        &[
            "presets", "--t", "10000", "--d", "4", "--m", "16", "--n", "3", "--g", "2",
        ],
        dir.path(),
    );
    let text = stdout(&o);
    assert!(text.contains("I=16") && text.contains("R=8"), "{text}");
}

#[test]
fn run_writes_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    let o = ssvr(&["run", "exp.toml"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["seed_1.csv", "seed_2.csv", "mean.csv", "manifest.json"] {
        assert!(dir.path().join("from_config").join(f).exists(), "{f}");
    }
    let o = ssvr(
        &[
            "run",
            "--config",
            "exp.toml",
            "--out",
            "elsewhere",
            "--jobs",
            "2",
            "--seed-offset",
            "10",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(dir.path().join("elsewhere/seed_12.csv").exists());
    let a = std::fs::read(dir.path().join("from_config/seed_1.csv")).unwrap();
    let o = ssvr(&["run", "exp.toml", "--out", "again"], dir.path());
    assert!(o.status.success());
    assert_eq!(
        a,
        std::fs::read(dir.path().join("again/seed_1.csv")).unwrap()
    );
}

#[test]
fn sweep_reports_fit() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    let o = ssvr(&["sweep", "exp.toml", "--out", "sw"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("exponent"));
    for f in ["sweep.csv", "fit.json", "T_50/mean.csv", "T_200/seed_2.csv"] {
        assert!(dir.path().join("sw").join(f).exists(), "{f}");
    }
}

#[test]
fn missing_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssvr(&["run", "nope.toml", "--out", "out"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_config_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        CONFIG.replace("\"ssvr\"", "\"adam\""),
    )
    .unwrap();
    let o = ssvr(&["run", "bad.toml"], dir.path());
    assert!(!o.status.success());
    assert!(!dir.path().join("from_config").exists());
    let o = ssvr(&["frobnicate"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn verify_passes_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssvr(&["verify"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().count() >= 7);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}
