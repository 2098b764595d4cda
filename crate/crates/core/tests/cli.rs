use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[agent]
theta_grid_points = 5

[agent.planner]
radius = 6.0
spacing = 0.1
actions_per_axis = 17

[reference.grid]
radius = 6.0
spacing = 0.1
actions_per_axis = 17

[sweep]
epsilons = [0.2]
horizons = [60.0]
seeds = [0, 1]
oracle = false
"#;

fn cli(args: &[&str], dir: &Path) -> Output {
    let config = dir.join("small.toml");
    if !config.exists() {
        std::fs::write(&config, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_ofu-diffusion"))
        .args(args)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_its_tables_and_passes_its_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--seed", "4", "--horizon", "60"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "events.csv",
        "episodes.csv",
        "telemetry.csv",
        "learning.csv",
        "report.json",
    ] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let events = std::fs::read_to_string(dir.path().join("out/events.csv")).unwrap();
    assert!(events.starts_with("n,tau,x_1,a_1,reward,xi_1\n"));
    assert!(stdout(&o).lines().all(|l| !l.starts_with("FAIL")));
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["sweep"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = dir.path().join("out");
    assert!(out.join("runs.csv").exists() && out.join("summary.csv").exists());
    std::fs::remove_dir_all(out.join("plots")).ok();
    let o = cli(&["plot"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.join("plots/regret_per_time_vs_epsilon.svg").exists());
}

#[test]
fn failed_checks_exit_with_two() {
    // At these step sizes the gap shrinks faster than the slope window
    // allows, so `plan` reports a failed check rather than a fault.
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["plan", "--eps", "0.4,0.2,0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL gap slope"));
    assert!(dir.path().join("out/gap.csv").exists());
}

#[test]
fn faults_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("small.toml"),
        "[sweep]\nunknown_field = 1\n",
    )
    .unwrap();
    let o = cli(&["run"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());

    let o = Command::new(env!("CARGO_BIN_EXE_ofu-diffusion"))
        .args(["certify", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    let o = Command::new(env!("CARGO_BIN_EXE_ofu-diffusion"))
        .args(["run", "--eps", "3.0"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn certify_accepts_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["certify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let cert: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/certificate.json")).unwrap(),
    )
    .unwrap();
    assert!(cert.is_object());
}
