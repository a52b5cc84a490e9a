//! One PASS/FAIL line per acceptance criterion.

use std::io::Write;

use bnls::verify::full_suite;

#[test]
fn acceptance_criteria() {
    let checks = full_suite(1);
    assert_eq!(checks.len(), 12);
    let mut out = std::io::stdout().lock();
    for c in &checks {
        writeln!(out, "{c}").unwrap();
    }
    drop(out);
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
