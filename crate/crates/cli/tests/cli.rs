//! Command-line behaviour: exit codes, output formats and determinism.

use std::process::{Command, Output};

fn hkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hkit"))
        .args(args)
        .output()
        .expect("hkit runs")
}

#[test]
fn empty_point_list_gives_a_header_only_csv() {
    let dir = std::env::temp_dir().join(format!("hkit-empty-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let pts = dir.join("points.csv");
    std::fs::write(&pts, "x1,y1,t\n").unwrap();
    let out = hkit(&["kernel", "eval", "--points", pts.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn kernel_eval_reproduces_the_reference_value() {
    let out = hkit(&["kernel", "eval", "--point", "1,0,0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    let k: f64 = row.split(',').next_back().unwrap().parse().unwrap();
    assert!((k + 0.10137).abs() < 1e-4, "{row}");
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    assert_eq!(hkit(&["--no-such-flag", "config", "show"]).status.code(), Some(2));
    assert_eq!(
        hkit(&["--mode", "heisenberg", "--n", "0", "config", "show"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        hkit(&["--config", "/nonexistent/hkit.toml", "config", "show"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_show_round_trips_through_a_file() {
    let first = hkit(&["--seed", "7", "--n", "2", "--cells", "8", "config", "show"]);
    assert!(first.status.success());
    let dir = std::env::temp_dir().join(format!("hkit-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cfg.toml");
    std::fs::write(&path, &first.stdout).unwrap();
    let second = hkit(&["--config", path.to_str().unwrap(), "config", "show"]);
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let args = ["--seed", "3", "--cells", "16", "bmo", "norm", "--levels", "2"];
    let one = Command::new(env!("CARGO_BIN_EXE_hkit"))
        .env("HKIT_THREADS", "1")
        .args(args)
        .output()
        .unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_hkit"))
        .env("HKIT_THREADS", "4")
        .args(args)
        .output()
        .unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
}
