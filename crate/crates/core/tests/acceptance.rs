//! Acceptance criteria 1-8, one pass/fail line per criterion.

use limlab::suites::{run_criterion, CriterionResult};

const SEED: u64 = 0x5eed_1e55;

fn run(id: u8) -> CriterionResult {
    let result = run_criterion(id, SEED).unwrap_or_else(|e| panic!("criterion {id} errored: {e}"));
    println!("{}", result.summary());
    for c in &result.checks {
        println!("    [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    result
}

#[test]
fn acceptance_criteria() {
    let results: Vec<CriterionResult> = (1..=8).map(run).collect();
    println!();
    for r in &results {
        println!("{}", r.summary());
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
