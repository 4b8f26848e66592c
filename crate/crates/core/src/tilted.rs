//! Single-particle diffusion under the spectral change of measure, its
//! integer-level renewal structure, and ballot-type barrier probabilities.
//!
//! The process solves `dY = phi(Y) dt + dW` with unit volatility, where
//! `phi = lambda + (ln psi)'` comes from the principal eigenpair at the
//! minimising tilt. First-passage times of the integer levels turn the path
//! into a centred random walk `S_k = T_k - k/v`, and the barrier estimators
//! measure the probability that this walk stays nonnegative (after a start
//! offset) while ending in a fixed window. Those probabilities decay like
//! `N^{-3/2}`, which the integration tests check as a fitted exponent.
//!
//! Everything here is Euler-Maruyama on a uniform grid. Level crossings are
//! refined by linear interpolation inside the crossing step; barrier events
//! are monitored on the grid only, with a dt-refinement test guarding the
//! discretisation bias.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::eigen::EigenPair;
use crate::env::PeriodicFunction;
use crate::error::Error;
use crate::trials::{run_trials, trial_rng};
use crate::Result;

/// Step size used by the barrier estimators unless a caller picks another
/// one through the `_with` variants.
pub const DEFAULT_DT: f64 = 1e-3;

/// Coarsest admissible Euler step.
const MAX_DT: f64 = 1e-2;

/// Paths asked to reach level `k` give up after `HORIZON_FACTOR * k / v`
/// time units. The passage time concentrates around `k/v` with Gaussian
/// fluctuations, so hitting this guard indicates a bug, not bad luck.
const HORIZON_FACTOR: f64 = 8.0;

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::config(format!(
            "step size must lie in (0, {MAX_DT}], got {dt}"
        )));
    }
    Ok(())
}

/// Speed `gamma / lambda` encoded by an eigenpair at the minimising tilt.
fn tilt_speed(ep: &EigenPair) -> Result<f64> {
    if !(ep.lambda > 0.0 && ep.gamma > 0.0) {
        return Err(Error::unsupported(
            "eigenpair does not define a positive renewal speed",
        ));
    }
    Ok(ep.gamma / ep.lambda)
}

/// Euler path of the tilted diffusion at uniform grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedPath {
    pub x0: f64,
    pub dt: f64,
    /// Y at times `0, dt, 2 dt, ...`. The start is included, so a horizon
    /// of `n * dt` stores `n + 1` values.
    pub values: Vec<f64>,
    pub seed: u64,
}

impl TiltedPath {
    pub fn horizon(&self) -> f64 {
        self.values.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn endpoint(&self) -> f64 {
        *self.values.last().unwrap_or(&self.x0)
    }
}

/// First-passage times of the integer levels together with the centred walk.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalRecord {
    /// `times[k-1]` is the first time the path reaches level `k`.
    pub times: Vec<f64>,
    /// `centered[k-1] = times[k-1] - k / v`, a mean-zero walk when `v` is
    /// the renewal speed of the path's drift.
    pub centered: Vec<f64>,
}

impl RenewalRecord {
    pub fn levels(&self) -> usize {
        self.times.len()
    }
}

/// Parameters of one discrete barrier probability
/// `P(y + S_N^d in [z, z+a], min_k (y + S_k^d) >= 0)` where
/// `S_k^d = S_k + k d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierQuery {
    /// Number of renewal steps N.
    pub n: u32,
    /// Start offset above the barrier, `y >= 0`.
    pub y: f64,
    /// Lower edge of the endpoint window, `z >= 0`.
    pub z: f64,
    /// Window width, `a > 0`.
    pub a: f64,
    /// Per-step drift correction. Must be `O(log N / N)`; we cap it at
    /// `log N / N` outright.
    pub d: f64,
}

impl BarrierQuery {
    /// Window `[z, z+1]` with no drift correction.
    pub fn plain(n: u32, y: f64, z: f64) -> BarrierQuery {
        BarrierQuery {
            n,
            y,
            z,
            a: 1.0,
            d: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("barrier query needs at least one step"));
        }
        if !(self.y >= 0.0 && self.y.is_finite()) {
            return Err(Error::config("barrier offset y must be finite and >= 0"));
        }
        if !(self.z >= 0.0 && self.z.is_finite()) {
            return Err(Error::config("window edge z must be finite and >= 0"));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::config("window width a must be finite and > 0"));
        }
        let cap = (self.n.max(2) as f64).ln() / self.n as f64;
        if !(self.d.is_finite() && self.d.abs() <= cap) {
            return Err(Error::config(format!(
                "drift correction |d| = {} exceeds log N / N = {cap:.6}",
                self.d.abs()
            )));
        }
        Ok(())
    }
}

#[inline]
fn em_step(phi: &PeriodicFunction, y: f64, dt: f64, sqdt: f64, rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    y + phi.eval(y) * dt + sqdt * z
}

/// Simulates one Euler path of `dY = phi(Y) dt + dW` started at `x0`.
///
/// `ep` must be the eigenpair at the minimising tilt; its eigenfunction
/// supplies the drift. The horizon is rounded to a whole number of steps.
/// The path draws from the stream keyed by `(seed, 0)`, so it coincides with
/// trial 0 of the multi-path operations below.
pub fn simulate_tilted(
    ep: &EigenPair,
    x0: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<TiltedPath> {
    check_dt(dt)?;
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::config("horizon must be finite and >= 0"));
    }
    let phi = ep.phi()?;
    let steps = (horizon / dt).round() as usize;
    let sqdt = dt.sqrt();
    let mut rng = trial_rng(seed, 0);
    let mut values = Vec::with_capacity(steps + 1);
    let mut y = x0;
    values.push(y);
    for _ in 0..steps {
        y = em_step(&phi, y, dt, sqdt, &mut rng);
        values.push(y);
    }
    Ok(TiltedPath {
        x0,
        dt,
        values,
        seed,
    })
}

/// Per-trial speed estimates `(Y_T - x0) / T` over keyed streams. Trial `k`
/// draws from the stream `(seed, k)`.
pub fn endpoint_speeds(
    ep: &EigenPair,
    x0: f64,
    horizon: f64,
    dt: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    check_dt(dt)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config("horizon must be finite and positive"));
    }
    let phi = ep.phi()?;
    let steps = (horizon / dt).round().max(1.0) as usize;
    let t = steps as f64 * dt;
    let sqdt = dt.sqrt();
    Ok(run_trials(trials, |k| {
        let mut rng = trial_rng(seed, k);
        let mut y = x0;
        for _ in 0..steps {
            y = em_step(&phi, y, dt, sqdt, &mut rng);
        }
        (y - x0) / t
    }))
}

/// Extracts the first-passage times of levels `1..=k_levels` from a stored
/// path, linear interpolation inside the crossing step. `v_star` is the
/// renewal speed used for the centred walk.
pub fn renewal_times(path: &TiltedPath, k_levels: usize, v_star: f64) -> Result<RenewalRecord> {
    if k_levels == 0 {
        return Err(Error::config("need at least one renewal level"));
    }
    if !(v_star > 0.0 && v_star.is_finite()) {
        return Err(Error::config("renewal speed must be finite and positive"));
    }
    if !(path.x0 < 1.0) {
        return Err(Error::config(
            "path must start below the first level for renewal extraction",
        ));
    }
    let mut times = Vec::with_capacity(k_levels);
    let mut next = 1usize;
    for i in 1..path.values.len() {
        let y0 = path.values[i - 1];
        let y1 = path.values[i];
        while next <= k_levels && y1 >= next as f64 {
            let frac = (next as f64 - y0) / (y1 - y0);
            times.push(((i - 1) as f64 + frac) * path.dt);
            next += 1;
        }
        if next > k_levels {
            break;
        }
    }
    if next <= k_levels {
        return Err(Error::simulation(format!(
            "path never reaches level {k_levels} (got to {})",
            next - 1
        )));
    }
    let centered = times
        .iter()
        .enumerate()
        .map(|(idx, &t)| t - (idx + 1) as f64 / v_star)
        .collect();
    Ok(RenewalRecord { times, centered })
}

/// Renewal extraction without path storage: steps the diffusion until level
/// `k_levels` and records interpolated crossing times on the fly.
fn renewal_trial(
    phi: &PeriodicFunction,
    x0: f64,
    k_levels: usize,
    dt: f64,
    v_star: f64,
    rng: &mut ChaCha8Rng,
) -> Result<RenewalRecord> {
    let sqdt = dt.sqrt();
    let max_steps = ((HORIZON_FACTOR * (k_levels as f64 + 4.0) / v_star) / dt).ceil() as u64;
    let mut times = Vec::with_capacity(k_levels);
    let mut next = 1usize;
    let mut y = x0;
    let mut step = 0u64;
    while next <= k_levels {
        if step >= max_steps {
            return Err(Error::simulation(format!(
                "renewal level {next} not reached within {} time units",
                max_steps as f64 * dt
            )));
        }
        let y1 = em_step(phi, y, dt, sqdt, rng);
        while next <= k_levels && y1 >= next as f64 {
            let frac = (next as f64 - y) / (y1 - y);
            times.push((step as f64 + frac) * dt);
            next += 1;
        }
        y = y1;
        step += 1;
    }
    let centered = times
        .iter()
        .enumerate()
        .map(|(idx, &t)| t - (idx + 1) as f64 / v_star)
        .collect();
    Ok(RenewalRecord { times, centered })
}

/// Samples independent renewal records, one per trial, with per-trial keyed
/// streams. The start `x0` must lie below the first level. The centred walk
/// uses the speed encoded by `ep`.
pub fn sample_renewals(
    ep: &EigenPair,
    x0: f64,
    k_levels: usize,
    trials: u64,
    dt: f64,
    seed: u64,
) -> Result<Vec<RenewalRecord>> {
    check_dt(dt)?;
    if !(x0 < 1.0) {
        return Err(Error::config(
            "start must lie below the first level for renewal sampling",
        ));
    }
    if k_levels == 0 {
        return Err(Error::config("need at least one renewal level"));
    }
    let v_star = tilt_speed(ep)?;
    let phi = ep.phi()?;
    let runs = run_trials(trials, |k| {
        let mut rng = trial_rng(seed, k);
        renewal_trial(&phi, x0, k_levels, dt, v_star, &mut rng)
    });
    runs.into_iter().collect()
}

fn success_rate(successes: u64, trials: u64) -> (f64, f64) {
    let p = successes as f64 / trials as f64;
    if successes == 0 {
        // Rule of three: one-sided 95% upper bound reported in the error slot.
        (0.0, 3.0 / trials as f64)
    } else {
        (p, (p * (1.0 - p) / trials as f64).sqrt())
    }
}

/// Monte Carlo estimate of the discrete barrier probability described by
/// `q`, using renewal records sampled at the default step size. Returns
/// `(p_hat, stderr)`; with zero successes `p_hat` is 0 and the second slot
/// carries the rule-of-three upper bound `3 / trials`.
pub fn estimate_barrier(
    ep: &EigenPair,
    q: &BarrierQuery,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    estimate_barrier_with(ep, q, trials, DEFAULT_DT, seed)
}

/// [`estimate_barrier`] with an explicit Euler step, for refinement checks.
pub fn estimate_barrier_with(
    ep: &EigenPair,
    q: &BarrierQuery,
    trials: u64,
    dt: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    q.validate()?;
    check_dt(dt)?;
    if trials < 10_000 {
        return Err(Error::config(
            "barrier estimation needs at least 10000 trials",
        ));
    }
    let v_star = tilt_speed(ep)?;
    let phi = ep.phi()?;
    let n = q.n as usize;
    let sqdt = dt.sqrt();
    let max_steps = ((HORIZON_FACTOR * (n as f64 + 4.0) / v_star) / dt).ceil() as u64;
    let outcomes = run_trials(trials, |k| -> Result<u64> {
        let mut rng = trial_rng(seed, k);
        let mut y = 0.0f64;
        let mut next = 1usize;
        let mut step = 0u64;
        let mut last_shifted = 0.0f64;
        while next <= n {
            if step >= max_steps {
                return Err(Error::simulation(format!(
                    "renewal level {next} not reached within {} time units",
                    max_steps as f64 * dt
                )));
            }
            let y1 = em_step(&phi, y, dt, sqdt, &mut rng);
            while next <= n && y1 >= next as f64 {
                let frac = (next as f64 - y) / (y1 - y);
                let t_cross = (step as f64 + frac) * dt;
                let s_k = t_cross - next as f64 / v_star;
                last_shifted = q.y + s_k + next as f64 * q.d;
                if last_shifted < 0.0 {
                    // Barrier hit; the event already failed, stop stepping.
                    return Ok(0);
                }
                next += 1;
            }
            y = y1;
            step += 1;
        }
        let hit = last_shifted >= q.z && last_shifted <= q.z + q.a;
        Ok(hit as u64)
    });
    let mut successes = 0u64;
    for r in outcomes {
        successes += r?;
    }
    Ok(success_rate(successes, trials))
}

/// Monte Carlo estimate of the continuous barrier probability
/// `P(y - (Y_t - q_t t) in [z, z+1], max_{s<=t} (Y_s - q_t s) <= y)` for a
/// path started at 0, where the barrier slope `q_t` is the mean front
/// location at time `t` divided by `t` (slightly below the speed, by the
/// logarithmic correction). Events are checked on the Euler grid.
pub fn continuous_barrier(
    ep: &EigenPair,
    t: f64,
    y: f64,
    z: f64,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    continuous_barrier_with(ep, t, y, z, trials, DEFAULT_DT, seed)
}

/// [`continuous_barrier`] with an explicit Euler step.
pub fn continuous_barrier_with(
    ep: &EigenPair,
    t: f64,
    y: f64,
    z: f64,
    trials: u64,
    dt: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    check_dt(dt)?;
    if !(y >= 1.0 && y.is_finite()) {
        return Err(Error::config("barrier offset y must be >= 1"));
    }
    if !(t >= 4.0 && t.is_finite()) {
        return Err(Error::config("horizon t must be >= 4"));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::config("window edge z must be finite and >= 0"));
    }
    if trials == 0 {
        return Err(Error::config("need at least one trial"));
    }
    let v_star = tilt_speed(ep)?;
    let q_t = v_star - 1.5 / ep.lambda * t.ln() / t;
    if !(q_t > 0.0) {
        return Err(Error::numerics(
            "centering slope is not positive at this horizon",
        ));
    }
    let phi = ep.phi()?;
    let steps = (t / dt).round() as usize;
    let t_grid = steps as f64 * dt;
    let sqdt = dt.sqrt();
    let outcomes = run_trials(trials, |k| {
        let mut rng = trial_rng(seed, k);
        let mut pos = 0.0f64;
        for i in 1..=steps {
            pos = em_step(&phi, pos, dt, sqdt, &mut rng);
            // Centered excursion X_s = Y_s - q_t s against the flat barrier.
            if pos - q_t * (i as f64 * dt) > y {
                return 0u64;
            }
        }
        let gap = y - (pos - q_t * t_grid);
        (gap >= z && gap <= z + 1.0) as u64
    });
    let successes: u64 = outcomes.iter().sum();
    Ok(success_rate(successes, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvironmentSpec;

    fn classic_pair(expr: &str) -> EigenPair {
        let env = EnvironmentSpec::classic(
            PeriodicFunction::from_expression(1.0, expr, 256, crate::env::Interpolation::Linear)
                .unwrap(),
        );
        let fp = crate::eigen::find_front_params(&env, 1e-8).unwrap();
        crate::eigen::solve_eigenpair(&env, fp.lambda_star().unwrap(), 256).unwrap()
    }

    fn mean_stderr(vals: &[f64]) -> (f64, f64) {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn zero_horizon_path_is_just_the_start() {
        let ep = classic_pair("1");
        let p = simulate_tilted(&ep, 0.25, 0.0, 1e-3, 7).unwrap();
        assert_eq!(p.values, vec![0.25]);
        assert_eq!(p.horizon(), 0.0);
        assert_eq!(p.endpoint(), 0.25);
    }

    #[test]
    fn paths_are_reproducible_and_step_count_matches_horizon() {
        let ep = classic_pair("1");
        let a = simulate_tilted(&ep, 0.0, 1.5, 1e-3, 11).unwrap();
        let b = simulate_tilted(&ep, 0.0, 1.5, 1e-3, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values.len(), 1501);
        assert!((a.horizon() - 1.5).abs() < 1e-12);
        let c = simulate_tilted(&ep, 0.0, 1.5, 1e-3, 12).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn step_size_is_validated() {
        let ep = classic_pair("1");
        assert!(simulate_tilted(&ep, 0.0, 1.0, 0.05, 1).is_err());
        assert!(simulate_tilted(&ep, 0.0, 1.0, 0.0, 1).is_err());
        assert!(estimate_barrier_with(&ep, &BarrierQuery::plain(8, 1.0, 0.0), 10_000, 0.2, 1).is_err());
    }

    #[test]
    fn constant_rate_drift_recovers_sqrt_two() {
        let ep = classic_pair("1");
        let speeds = endpoint_speeds(&ep, 0.0, 100.0, 1e-3, 100, 42).unwrap();
        let (mean, se) = mean_stderr(&speeds);
        let target = 2.0f64.sqrt();
        assert!(
            (mean - target).abs() < 3.0 * se,
            "mean {mean} vs {target} (se {se})"
        );
    }

    #[test]
    fn injected_linear_path_has_exact_renewals() {
        // Y_t = 2 t sampled at dt = 0.25, so T_k = k / 2 up to interpolation.
        let values: Vec<f64> = (0..=40).map(|i| 0.5 * i as f64).collect();
        let path = TiltedPath {
            x0: 0.0,
            dt: 0.25,
            values,
            seed: 0,
        };
        let rec = renewal_times(&path, 10, 2.0).unwrap();
        for (k, (&t, &s)) in rec.times.iter().zip(rec.centered.iter()).enumerate() {
            let expected = (k + 1) as f64 / 2.0;
            assert!((t - expected).abs() < 1e-12, "T_{} = {t}", k + 1);
            assert!(s.abs() < 1e-12, "S_{} = {s}", k + 1);
        }
    }

    #[test]
    fn renewal_interpolation_refines_between_grid_points() {
        let path = TiltedPath {
            x0: 0.0,
            dt: 1.0,
            values: vec![0.0, 0.8, 1.6],
            seed: 0,
        };
        let rec = renewal_times(&path, 1, 1.0).unwrap();
        assert!((rec.times[0] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn unreached_level_is_an_error() {
        let path = TiltedPath {
            x0: 0.0,
            dt: 0.5,
            values: vec![0.0, 0.4, 0.9],
            seed: 0,
        };
        let err = renewal_times(&path, 2, 1.0).unwrap_err();
        assert!(err.to_string().contains("never reaches"), "{err}");
    }

    #[test]
    fn renewal_times_are_strictly_increasing() {
        let ep = classic_pair("1 + 0.5*sin(2*pi*x)");
        let recs = sample_renewals(&ep, 0.0, 20, 8, 1e-3, 5).unwrap();
        for rec in &recs {
            assert_eq!(rec.levels(), 20);
            for w in rec.times.windows(2) {
                assert!(w[1] > w[0], "times not increasing: {w:?}");
            }
        }
    }

    #[test]
    fn barrier_query_validation_catches_bad_parameters() {
        assert!(BarrierQuery::plain(0, 1.0, 0.0).validate().is_err());
        assert!(BarrierQuery::plain(8, -1.0, 0.0).validate().is_err());
        assert!(BarrierQuery::plain(8, 1.0, -0.5).validate().is_err());
        let mut q = BarrierQuery::plain(8, 1.0, 0.0);
        q.a = 0.0;
        assert!(q.validate().is_err());
        let mut q = BarrierQuery::plain(64, 1.0, 0.0);
        q.d = 1.0; // far above log(64)/64
        assert!(q.validate().is_err());
        q.d = 0.5 * 64f64.ln() / 64.0;
        assert!(q.validate().is_ok());
    }

    #[test]
    fn unreachable_window_gives_zero_with_one_sided_bound() {
        let ep = classic_pair("1");
        // At N = 8 the walk S_N has standard deviation well under 2, so a
        // window 40 units away is never hit.
        let q = BarrierQuery::plain(8, 0.0, 40.0);
        let (p, bound) = estimate_barrier(&ep, &q, 10_000, 3).unwrap();
        assert_eq!(p, 0.0);
        assert!((bound - 3e-4).abs() < 1e-12);
    }

    #[test]
    fn inactive_barrier_matches_free_window_probability() {
        let ep = classic_pair("1");
        let n = 16u32;
        let y = 10.0 * (n as f64).sqrt();
        // Window [y, y+1] for y + S_N means S_N in [0, 1]; with the barrier
        // 40 units below the walk it never binds, so the constrained and
        // free probabilities must agree.
        let q = BarrierQuery {
            n,
            y,
            z: y,
            a: 1.0,
            d: 0.0,
        };
        let (p_con, se_con) = estimate_barrier(&ep, &q, 20_000, 9).unwrap();
        let recs = sample_renewals(&ep, 0.0, n as usize, 20_000, DEFAULT_DT, 1009).unwrap();
        let hits = recs
            .iter()
            .filter(|r| {
                let s = r.centered[n as usize - 1];
                (0.0..=1.0).contains(&s)
            })
            .count();
        let p_free = hits as f64 / recs.len() as f64;
        let se_free = (p_free * (1.0 - p_free) / recs.len() as f64).sqrt();
        let tol = 3.0 * se_con.hypot(se_free);
        assert!(
            (p_con - p_free).abs() < tol,
            "constrained {p_con} vs free {p_free} (tol {tol})"
        );
    }

    #[test]
    fn first_passage_tail_decays_geometrically() {
        let ep = classic_pair("1");
        let recs = sample_renewals(&ep, 0.0, 1, 30_000, 1e-3, 77).unwrap();
        let count_ge = |t: f64| recs.iter().filter(|r| r.times[0] >= t).count() as f64;
        let c2 = count_ge(2.0);
        let c4 = count_ge(4.0);
        let c8 = count_ge(8.0);
        assert!(c2 > 0.0, "no mass at t >= 2, tail check vacuous");
        assert!(c4 <= 0.6 * c2, "P(T1 >= 4) = {c4} vs P(T1 >= 2) = {c2}");
        assert!(c8 <= 0.6 * c4.max(1.0), "P(T1 >= 8) = {c8} vs {c4}");
    }

    #[test]
    fn continuous_window_above_the_path_is_never_hit() {
        // Hitting the window would need Y_t about six standard deviations
        // below its mean, so every trial must miss.
        let ep = classic_pair("1");
        let t = 16.0;
        let z = 2.0 + 2.0f64.sqrt() * t;
        let (p, bound) = continuous_barrier(&ep, t, 2.0, z, 10_000, 21).unwrap();
        assert_eq!(p, 0.0);
        assert!(bound > 0.0);
    }

    #[test]
    fn continuous_preconditions_are_enforced() {
        let ep = classic_pair("1");
        assert!(continuous_barrier(&ep, 4.0, 0.5, 0.0, 100, 1).is_err());
        assert!(continuous_barrier(&ep, 2.0, 2.0, 0.0, 100, 1).is_err());
        assert!(estimate_barrier(&ep, &BarrierQuery::plain(8, 1.0, 0.0), 100, 1).is_err());
    }
}
