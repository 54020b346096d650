use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_darklattice"));
    cmd.args(args).env_remove("DARKLATTICE_OUT_DIR");
    if let Some(d) = out_dir {
        cmd.env("DARKLATTICE_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

#[test]
fn unknown_parameter_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--set", "lattice.nperp=4"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["spectrum", "--preset", "nosuch"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn preset_for_another_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["transfer", "--preset", "fig2c"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_lattice_exits_with_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--set", "lattice.spacing=-0.5"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn relative_output_lands_in_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["analytic", "--preset", "analytic", "--out", "sub/inf.csv"], Some(dir.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("sub/inf.csv");
    assert_eq!(data_lines(&csv).len(), 402);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sub/inf.json")).unwrap()).unwrap();
    assert_eq!(json["command"], "analytic");
    assert_eq!(json["preset"], "analytic");
    assert_eq!(json["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn empty_sweep_writes_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "spectrum",
            "--preset",
            "fig2c",
            "--set",
            "sweep.values=[]",
            "--set",
            "lattice.n_perp=4",
            "--out",
            "one.csv",
        ],
        Some(dir.path()),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = data_lines(&dir.path().join("one.csv"));
    assert_eq!(lines.len(), 2, "{lines:?}");
    assert!(lines[0].starts_with("n_perp,"));
}

#[test]
fn sweep_rows_follow_the_grid_and_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, jobs: &'static str| {
        vec!["transfer", "--preset", "fig3c", "--jobs", jobs, "--out", out]
    };
    assert!(run(&args("a.csv", "1"), Some(dir.path())).status.success());
    assert!(run(&args("b.csv", "2"), Some(dir.path())).status.success());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let lines = data_lines(&dir.path().join("a.csv"));
    assert!(lines[0].starts_with("transfer.gamma_d,"));
    let first: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(first.windows(2).all(|w| w[0] < w[1]), "{first:?}");
}
