//! Runs the full named-invariant registry and checks the coverage: every
//! invariant stated for the assembly, kernel, linearized and nonlinear
//! modules must be present and pass.

use mhdpress::verify::{run_invariants, EXPECTED_INVARIANTS};

#[test]
fn all_registered_invariants_pass() {
    let results = run_invariants(None);
    let names: Vec<&str> = results.iter().map(|r| r.name.as_str()).collect();
    for want in EXPECTED_INVARIANTS {
        assert!(names.contains(&want), "registry omits invariant {want}");
    }
    let mut failed = Vec::new();
    for r in &results {
        println!(
            "[{}] {} - {}",
            if r.passed { "pass" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failed.push(r.name.clone());
        }
    }
    assert!(failed.is_empty(), "failing invariants: {failed:?}");
}

#[test]
fn filter_selects_subset() {
    let results = run_invariants(Some("kernel"));
    assert_eq!(results.len(), 3);
    assert!(results.iter().all(|r| r.name.starts_with("kernel-")));
}
