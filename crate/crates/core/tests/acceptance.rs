//! Acceptance gate: every numbered consistency check must pass on the
//! built-in environments.
//!
//! Each test runs one check, prints its one-line summary and asserts the
//! verdict; a failing line carries the measured values. This is the same
//! code path as `perifront verify full`. Run only this gate with
//! `cargo test --test acceptance -- --nocapture`.
//!
//! Expect a long wall time: the Monte Carlo checks (5, 9, 10) take tens of
//! minutes each on a few cores.

use perifront::verify::{criterion, VerifyEnvs};

fn check(id: u32) {
    let outcome = criterion(id, &VerifyEnvs::builtin()).expect("check id is valid");
    let line = outcome.summary_line();
    println!("{line}");
    assert!(outcome.passed, "{line}");
}

#[test]
fn c01_classical_constants() {
    check(1);
}

#[test]
fn c02_eigenvalue_bounds() {
    check(2);
}

#[test]
fn c03_tilt_identity() {
    check(3);
}

#[test]
fn c04_tilted_lln_renewal() {
    check(4);
}

#[test]
fn c05_ballot_scaling() {
    check(5);
}

#[test]
fn c06_many_to_one() {
    check(6);
}

#[test]
fn c07_pde_front_speed() {
    check(7);
}

#[test]
fn c08_pulsating_wave() {
    check(8);
}

#[test]
fn c09_bbm_tail_exponent() {
    check(9);
}

#[test]
fn c10_subsequence_ks() {
    check(10);
}

#[test]
fn c11_brw_dichotomy() {
    check(11);
}

#[test]
fn c12_diffusion_variant() {
    check(12);
}

#[test]
fn c13_synthetic_tails() {
    check(13);
}
