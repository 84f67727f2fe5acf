use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"[domain]
resolution = [4, 4]

[time]
t_final = 1.0
steps = 12

[[target.inclusions]]
center = [0.5, 0.5]
width = 0.06
amplitude = 1.0

[optimizer]
max_iterations = 2

[output]
frames = 2
"#;

fn cip(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    if !cfg.exists() {
        std::fs::write(&cfg, CONFIG).unwrap();
    }
    let out_dir = dir.join("out");
    let mut all = vec![args[0], "--config", cfg.to_str().unwrap()];
    all.extend_from_slice(&args[1..]);
    let o = format!("output.dir=\"{}\"", out_dir.display());
    all.extend_from_slice(&["--set", &o]);
    Command::new(env!("CARGO_BIN_EXE_cip"))
        .args(&all)
        .env_remove("CIP_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synthesize_writes_observations() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cip(tmp.path(), &["synthesize"]);
    assert!(o.status.success(), "{o:?}");
    let table = std::fs::read_to_string(tmp.path().join("out/observations.csv")).unwrap();
    assert!(table.lines().count() > 1);
    assert!(tmp.path().join("out/resolved_config.toml").exists());
}

#[test]
fn grad_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cip(tmp.path(), &["grad-check", "--directions", "3"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("pass: largest relative error"));
}

#[test]
fn grad_check_at_exact_reference_is_degenerate() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("run.toml"),
        CONFIG.replace("amplitude = 1.0", "amplitude = 0.0") + "\n[data]\nfine_factor = 1\n",
    )
    .unwrap();
    let o = cip(
        tmp.path(),
        &["grad-check", "--directions", "2", "--at", "reference"],
    );
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("degenerate pass"));
}

#[test]
fn estimate_exports_one_cycle() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cip(tmp.path(), &["estimate"]);
    assert!(o.status.success(), "{o:?}");
    let cycle = tmp.path().join("out/cycle_00");
    for f in ["eps.vtk", "estimate.vtk", "estimates.csv", "manifest.csv"] {
        assert!(cycle.join(f).exists(), "missing {f}");
    }
    assert!(!tmp.path().join("out/cycle_01").exists());
}

#[test]
fn unknown_key_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("run.toml"),
        CONFIG.replace("steps = 12", "steps = 12\nstepz = 3"),
    )
    .unwrap();
    let o = cip(tmp.path(), &["synthesize"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 7"), "{err}");
    assert!(err.contains("stepz"), "{err}");
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let env_dir = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_cip"))
        .args(["synthesize", "--config", cfg.to_str().unwrap()])
        .env("CIP_OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(env_dir.join("observations.csv").exists());
}
