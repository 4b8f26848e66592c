//! Tail-prefactor profile estimates against branching simulations.
//!
//! These run the particle system for 1e5 trials per grid time, so the file
//! is the slow part of the statistics checks; the window is kept modest
//! because every assertion here compares runs at the same window, where the
//! pruning bias cancels.

use perifront::bbm::PruneConfig;
use perifront::eigen::{find_front_params, front_position, FrontParams};
use perifront::env::{EnvironmentSpec, Interpolation, PeriodicFunction};
use perifront::stats::nu_profile;

const TRIALS: u64 = 100_000;

fn env_for(expr: &str) -> (EnvironmentSpec, FrontParams) {
    let env = EnvironmentSpec::classic(
        PeriodicFunction::from_expression(1.0, expr, 256, Interpolation::Linear).unwrap(),
    );
    let fp = find_front_params(&env, 1e-8).unwrap();
    (env, fp)
}

fn prune() -> PruneConfig {
    PruneConfig {
        window: 5.0,
        hard_cap: 2_000_000,
    }
}

#[test]
fn homogeneous_profile_is_flat_across_phases() {
    let (env, fp) = env_for("1");
    let grid = [10.0, 10.19, 10.38];
    let pts = nu_profile(&env, &fp, &grid, 3.0, TRIALS, 1e-3, prune(), 900).unwrap();
    assert_eq!(pts.len(), 3);
    for i in 0..pts.len() {
        for j in 0..i {
            let tol = 2.0 * pts[i].stderr.hypot(pts[j].stderr);
            let gap = (pts[i].nu_hat - pts[j].nu_hat).abs();
            assert!(
                gap <= tol,
                "phases {:.3} and {:.3} differ by {gap:.4} (tol {tol:.4})",
                pts[i].phase,
                pts[j].phase
            );
        }
    }
}

#[test]
fn periodic_profile_is_positive_and_phase_consistent() {
    let (env, fp) = env_for("1 + 0.5*sin(2*pi*x)");
    // Three spread phases plus a fourth time sharing the phase of the
    // first: the centering moves by exactly one period between them.
    let t0 = 10.0;
    let m0 = front_position(&fp, t0).unwrap();
    let v = fp.v_star().unwrap();
    let mut t1 = t0 + 1.0 / v;
    for _ in 0..60 {
        let m1 = front_position(&fp, t1).unwrap();
        t1 -= (m1 - m0 - 1.0) / v;
    }
    let grid = [t0, 10.24, 10.48, t1];
    let pts = nu_profile(&env, &fp, &grid, 3.0, TRIALS, 1e-3, prune(), 910).unwrap();

    for p in &pts {
        assert!(
            p.nu_hat > 3.0 * p.stderr,
            "profile not positive at phase {:.3}",
            p.phase
        );
    }

    let first = &pts[0];
    let again = &pts[3];
    assert!(
        (first.phase - again.phase).abs() < 1e-6,
        "phases {} vs {}",
        first.phase,
        again.phase
    );
    let tol = 3.0 * first.stderr.hypot(again.stderr);
    assert!(
        (first.nu_hat - again.nu_hat).abs() <= tol,
        "same phase, estimates {} vs {} (tol {tol})",
        first.nu_hat,
        again.nu_hat
    );
}

#[test]
fn profile_replicates_across_seeds() {
    let (env, fp) = env_for("1");
    let a = nu_profile(&env, &fp, &[10.0], 3.0, TRIALS, 1e-3, prune(), 920).unwrap();
    let b = nu_profile(&env, &fp, &[10.0], 3.0, TRIALS, 1e-3, prune(), 921).unwrap();
    let tol = 3.0 * a[0].stderr.hypot(b[0].stderr);
    assert!(
        (a[0].nu_hat - b[0].nu_hat).abs() <= tol,
        "seeds disagree: {} vs {} (tol {tol})",
        a[0].nu_hat,
        b[0].nu_hat
    );
}
