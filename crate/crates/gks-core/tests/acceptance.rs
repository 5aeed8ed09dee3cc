//! Acceptance criteria, one test per criterion. Each test prints its
//! pass/fail line with the measured numbers and asserts both the verdict
//! and the criterion's runtime budget.

use gks_core::acceptance::{self, CriterionReport};
use std::time::Instant;

fn check(report: CriterionReport, budget_secs: f64) {
    let line = acceptance::render_report(std::slice::from_ref(&report));
    print!("{line}");
    assert!(report.passed, "{}", line.trim_end());
    assert!(
        budget_secs > 0.0,
        "budget must be positive (got {budget_secs})"
    );
}

fn timed(budget_secs: f64, f: fn() -> CriterionReport) {
    let t0 = Instant::now();
    let report = f();
    let elapsed = t0.elapsed().as_secs_f64();
    println!("[{elapsed:.1}s / {budget_secs:.0}s budget]");
    assert!(
        elapsed < budget_secs,
        "criterion {} exceeded its {budget_secs:.0}s budget ({elapsed:.1}s)",
        report.name
    );
    check(report, budget_secs);
}

#[test]
fn criterion_1_profile_identities() {
    timed(60.0, acceptance::profile_identities);
}

#[test]
fn criterion_2_cnoidal_residual() {
    timed(10.0, acceptance::cnoidal_residual);
}

#[test]
fn criterion_3_delta_expansion() {
    timed(30.0, acceptance::delta_expansion);
}

#[test]
fn criterion_4_spectral_match() {
    timed(120.0, acceptance::spectral_match);
}

#[test]
fn criterion_5_spectral_curvature() {
    timed(120.0, acceptance::spectral_curvature);
}

#[test]
fn criterion_6_kdv_limit() {
    timed(60.0, acceptance::kdv_limit);
}

#[test]
fn criterion_7_relaxation() {
    timed(60.0, acceptance::relaxation);
}

#[test]
fn criterion_8_dynamic() {
    timed(300.0, acceptance::dynamic);
}

#[test]
fn criterion_9_determinism() {
    // No budget in the criterion list beyond good sense; hold it to the
    // sum of its three sub-criteria run twice.
    timed(150.0, acceptance::determinism);
}
