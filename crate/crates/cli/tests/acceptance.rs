//! One test per acceptance criterion. Each prints its PASS/FAIL line straight
//! to stdout, so the table shows up even when output capture is on.

use std::io::Write;

use chiral_qhe_cli::acceptance;

fn check(id: u8) {
    let r = acceptance::run(id);
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance {}", r.line());
    let _ = out.flush();
    assert!(
        r.passed,
        "criterion {id} ({}) failed: {}",
        r.title, r.detail
    );
}

#[test]
fn criterion_01_spectral_closed_forms() {
    check(1);
}

#[test]
fn criterion_02_oracle_equivalence() {
    check(2);
}

#[test]
fn criterion_03_conservation() {
    check(3);
}

#[test]
fn criterion_04_chirality_quadruple() {
    check(4);
}

#[test]
fn criterion_05_corner_states() {
    check(5);
}

#[test]
fn criterion_06_thermodynamic_signs() {
    check(6);
}

#[test]
fn criterion_07_chirality_transition() {
    check(7);
}

#[test]
fn criterion_08_single_sheet_nonreciprocity() {
    check(8);
}

#[test]
fn criterion_09_no_jump_limit() {
    check(9);
}

#[test]
fn criterion_10_determinism() {
    check(10);
}
