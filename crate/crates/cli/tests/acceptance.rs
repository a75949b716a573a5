//! Acceptance table: one line per criterion.
//!
//! Criteria 1 to 13 run in process; criterion 14 runs the `selftest`
//! subcommand of the built binary and compares its verdicts.
//!
//! Criterion 8 has a half that does not hold (see README); it is printed as
//! FAIL, and so is criterion 14 which depends on it. The target exits
//! non-zero when anything else fails or when those two lines turn out to
//! disagree with the measurements.

use std::process::{Command, ExitCode};

use infsup_lab_core::criteria::{self, CriterionOutcome};
use infsup_lab_core::verify::worker_count;
use serde_json::Value;

const KNOWN_FAILURES: &[usize] = &[8];

fn selftest_line(inproc: &[CriterionOutcome]) -> (bool, String, Vec<String>) {
    let dir = tempfile::tempdir().expect("tempdir");
    let json = dir.path().join("selftest.json");
    let out = Command::new(env!("CARGO_BIN_EXE_infsup-lab"))
        .args(["selftest", "--json"])
        .arg(&json)
        .output()
        .expect("run selftest");
    let mut problems = Vec::new();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines = stdout.lines().filter(|l| l.starts_with("criterion ")).count();
    if lines != 13 {
        problems.push(format!("selftest printed {lines} criterion lines"));
    }
    let record: Value = serde_json::from_str(&std::fs::read_to_string(&json).expect("selftest json")).expect("parse");
    let verdicts: Vec<bool> = record["results"]
        .as_array()
        .expect("results array")
        .iter()
        .map(|r| r["passed"].as_bool().unwrap_or(false))
        .collect();
    let expected: Vec<bool> = inproc.iter().map(|o| o.passed).collect();
    if verdicts != expected {
        problems.push(format!("selftest verdicts {verdicts:?} differ from in-process {expected:?}"));
    }
    let code = out.status.code();
    let all = verdicts.iter().all(|&p| p) && verdicts.len() == 13;
    if (code == Some(0)) != all {
        problems.push(format!("exit code {code:?} with all-pass = {all}"));
    }
    let passed = verdicts.iter().filter(|&&p| p).count();
    let detail = format!("{passed}/13 passed, exit code {}", code.map_or("none".into(), |c| c.to_string()));
    (code == Some(0), detail, problems)
}

fn main() -> ExitCode {
    let threads = worker_count();
    let ids: Vec<usize> = criteria::IDS.collect();
    let outcomes = criteria::evaluate_all(&ids, threads, criteria::DEFAULT_SEED);
    let mut unexpected = Vec::new();
    for o in &outcomes {
        println!("{o}");
        if !o.passed && !KNOWN_FAILURES.contains(&o.id) {
            unexpected.push(format!("criterion {} failed", o.id));
        }
    }
    // the plain half of criterion 8 must still hold
    match criteria::locking_ratio(infsup_lab_core::locking::LockingMethod::Plain, 8, Default::default()) {
        Ok(r) if r <= 0.2 => {}
        other => unexpected.push(format!("plain locking ratio {other:?}")),
    }

    let (passed, detail, problems) = selftest_line(&outcomes);
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("criterion 14 {verdict}  {}: {detail}", criteria::title(14));
    unexpected.extend(problems);

    let total = outcomes.iter().filter(|o| o.passed).count() + usize::from(passed);
    println!("{total}/14 criteria passed");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        for u in &unexpected {
            eprintln!("unexpected: {u}");
        }
        ExitCode::FAILURE
    }
}
