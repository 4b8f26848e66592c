//! Branching diffusion simulator with front-window pruning.
//!
//! Particles diffuse and split at the position-dependent rate `g`. Branch
//! times are sampled by thinning against the uniform bound `beta = max g`:
//! candidate events arrive at rate `beta` and are accepted with probability
//! `g(x)/beta`, which is exact in law and puts no quadrature error into the
//! event times. Between candidate events the classical model advances by one
//! exact Gaussian increment; drift/volatility variants substep with
//! Euler-Maruyama at the caller's `dt`. Laggards more than a window below
//! the running maximum are discarded at slice boundaries, with the discard
//! count reported so the bias stays falsifiable.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::eigen::{find_front_params, front_position, FrontParams, DEFAULT_MIN_TOL};
use crate::env::EnvironmentSpec;
use crate::trials::{run_trials, trial_rng};
use crate::{Error, Result};

/// Pruning and population-sanity cadence in time units.
pub const SLICE_DT: f64 = 0.25;

/// Upper bound on the Euler-Maruyama substep.
pub const MAX_DT: f64 = 1e-2;

/// Internal path step of the Feynman-Kac side of the many-to-one check.
const QUADRATURE_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: f64,
    pub id: u64,
    pub parent_id: u64,
}

#[derive(Debug, Clone)]
pub struct PopulationSnapshot {
    pub time: f64,
    pub particles: Vec<Particle>,
    pub max_position: f64,
    pub pruned_count: u64,
    pub prune_window: f64,
}

impl PopulationSnapshot {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PruneConfig {
    /// Distance below the running maximum beyond which particles drop.
    pub window: f64,
    /// Live-population ceiling; exceeding it is an error, never truncation.
    pub hard_cap: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            window: 30.0,
            hard_cap: 2_000_000,
        }
    }
}

impl PruneConfig {
    pub fn unpruned() -> Self {
        PruneConfig {
            window: f64::INFINITY,
            hard_cap: 2_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) {
            return Err(Error::config("prune window must be positive"));
        }
        if self.hard_cap == 0 {
            return Err(Error::config("hard cap must be positive"));
        }
        Ok(())
    }
}

/// One centered-maximum draw with its pruning diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct MaxSample {
    pub trial: u64,
    pub raw: f64,
    pub centered: f64,
    pub pruned: u64,
}

enum Motion {
    /// Unit volatility, zero drift: exact Gaussian increments.
    Exact,
    /// Euler-Maruyama substeps bounded by `dt`.
    Em { dt: f64 },
}

struct Engine<'a> {
    env: &'a EnvironmentSpec,
    beta: f64,
    motion: Motion,
    binary: bool,
}

impl<'a> Engine<'a> {
    fn new(env: &'a EnvironmentSpec, dt: f64) -> Result<Engine<'a>> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::config(format!(
                "dt = {dt} outside (0, {MAX_DT}]"
            )));
        }
        let classic_motion =
            env.mu.is_constant_eq(0.0) && env.sigma.is_constant_eq(1.0);
        Ok(Engine {
            env,
            beta: env.beta(),
            motion: if classic_motion {
                Motion::Exact
            } else {
                Motion::Em { dt }
            },
            binary: env.offspring.is_binary(),
        })
    }

    fn advance(&self, x: &mut f64, tau: f64, rng: &mut ChaCha8Rng) {
        if tau <= 0.0 {
            return;
        }
        match self.motion {
            Motion::Exact => {
                let z: f64 = rng.sample(StandardNormal);
                *x += tau.sqrt() * z;
            }
            Motion::Em { dt } => {
                let n_sub = (tau / dt).ceil().max(1.0) as usize;
                let h = tau / n_sub as f64;
                let sqrt_h = h.sqrt();
                for _ in 0..n_sub {
                    let z: f64 = rng.sample(StandardNormal);
                    *x += self.env.mu.eval(*x) * h
                        + self.env.sigma.eval(*x) * sqrt_h * z;
                }
            }
        }
    }

    /// Simulates to `t_end`, recording nothing but the final population.
    fn run(
        &self,
        t_end: f64,
        prune: PruneConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<PopulationSnapshot> {
        prune.validate()?;
        if !(t_end >= 0.0) {
            return Err(Error::config("t_end must be nonnegative"));
        }
        let mut particles = vec![Particle {
            position: 0.0,
            id: 0,
            parent_id: 0,
        }];
        let mut next_id: u64 = 1;
        let mut pruned_count: u64 = 0;

        let mut t = 0.0;
        // (birth time within slice, particle) worklist
        let mut stack: Vec<(f64, Particle)> = Vec::new();
        let mut survivors: Vec<Particle> = Vec::new();
        while t < t_end {
            let slice_end = (t + SLICE_DT).min(t_end);
            stack.extend(particles.drain(..).map(|p| (t, p)));
            while let Some((t0, mut p)) = stack.pop() {
                let mut s = t0;
                loop {
                    let wait: f64 = rng.sample::<f64, _>(Exp1) / self.beta;
                    if s + wait >= slice_end {
                        self.advance(&mut p.position, slice_end - s, rng);
                        break;
                    }
                    s += wait;
                    self.advance(&mut p.position, wait, rng);
                    let gx = self.env.g.eval(p.position);
                    if rng.gen::<f64>() * self.beta < gx {
                        let k = if self.binary {
                            2
                        } else {
                            let cell = self.env.offspring.cell(p.position);
                            self.env.offspring.sample(cell, rng.gen::<f64>())
                        };
                        // the splitting particle is replaced by k children at
                        // its position; one of them continues in place
                        let parent = p.id;
                        p.parent_id = parent;
                        p.id = next_id;
                        next_id += 1;
                        for _ in 1..k {
                            stack.push((
                                s,
                                Particle {
                                    position: p.position,
                                    id: next_id,
                                    parent_id: parent,
                                },
                            ));
                            next_id += 1;
                        }
                        if stack.len() + survivors.len() > 4 * prune.hard_cap {
                            return Err(Error::simulation(format!(
                                "population blew past the hard cap {} mid-slice at t = {s:.2}",
                                prune.hard_cap
                            )));
                        }
                    }
                }
                survivors.push(p);
            }
            std::mem::swap(&mut particles, &mut survivors);
            t = slice_end;

            let max = particles
                .iter()
                .map(|p| p.position)
                .fold(f64::NEG_INFINITY, f64::max);
            if prune.window.is_finite() {
                let floor = max - prune.window;
                let before = particles.len();
                particles.retain(|p| p.position >= floor);
                pruned_count += (before - particles.len()) as u64;
            }
            if particles.len() > prune.hard_cap {
                return Err(Error::simulation(format!(
                    "live population {} exceeds the hard cap {} at t = {t:.2}; \
                     shrink the prune window",
                    particles.len(),
                    prune.hard_cap
                )));
            }
        }

        let max_position = particles
            .iter()
            .map(|p| p.position)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(PopulationSnapshot {
            time: t_end,
            particles,
            max_position: if t_end == 0.0 { 0.0 } else { max_position },
            pruned_count,
            prune_window: prune.window,
        })
    }
}

/// Classical-motion run (unit volatility, zero drift, offspring from the
/// environment's law). Single-run entry point; equals trial 0 of
/// [`max_samples`] with the same seed.
pub fn simulate_bbm(
    env: &EnvironmentSpec,
    t_end: f64,
    dt: f64,
    prune: PruneConfig,
    seed: u64,
) -> Result<PopulationSnapshot> {
    if !(env.mu.is_constant_eq(0.0) && env.sigma.is_constant_eq(1.0)) {
        return Err(Error::config(
            "classical simulator needs zero drift and unit volatility; use the diffusion variant",
        ));
    }
    let engine = Engine::new(env, dt)?;
    engine.run(t_end, prune, &mut trial_rng(seed, 0))
}

/// Drift/volatility variant. Refuses environments whose front recedes
/// (minimal speed not positive), since the centering theory covers only
/// rightward invasion.
pub fn simulate_diffusion_bbm(
    env: &EnvironmentSpec,
    t_end: f64,
    dt: f64,
    prune: PruneConfig,
    seed: u64,
) -> Result<PopulationSnapshot> {
    let fp = find_front_params(env, DEFAULT_MIN_TOL)?;
    guard_speed(&fp)?;
    let engine = Engine::new(env, dt)?;
    engine.run(t_end, prune, &mut trial_rng(seed, 0))
}

fn guard_speed(fp: &FrontParams) -> Result<()> {
    if !fp.attained {
        return Err(Error::unsupported(
            "front speed minimiser not attained for this environment",
        ));
    }
    if fp.v_star()? <= 0.0 {
        return Err(Error::unsupported(
            "minimal speed is not positive; the maximum does not invade rightward",
        ));
    }
    Ok(())
}

/// Independent centered-maximum draws `M_t - m_t`, one per trial, with
/// per-trial pruning diagnostics. Trials map over keyed RNG streams, so the
/// result is identical for any worker count.
pub fn max_samples(
    env: &EnvironmentSpec,
    fp: &FrontParams,
    t: f64,
    trials: u64,
    dt: f64,
    prune: PruneConfig,
    seed: u64,
) -> Result<Vec<MaxSample>> {
    guard_speed(fp)?;
    let m_t = front_position(fp, t)?;
    let engine = Engine::new(env, dt)?;
    let runs = run_trials(trials, |k| {
        engine
            .run(t, prune, &mut trial_rng(seed, k))
            .map(|snap| MaxSample {
                trial: k,
                raw: snap.max_position,
                centered: snap.max_position - m_t,
                pruned: snap.pruned_count,
            })
    });
    runs.into_iter().collect()
}

/// Sum over particles versus a weighted single-path expectation.
#[derive(Debug, Clone, Copy)]
pub struct ManyToOneReport {
    /// Branching side: mean count of particles in the window at time t.
    pub lhs: f64,
    pub lhs_err: f64,
    /// Feynman-Kac side: mean of exp(int g along one path) over the window.
    pub rhs: f64,
    pub rhs_err: f64,
}

impl ManyToOneReport {
    /// Root-sum-square of the two standard errors.
    pub fn combined_err(&self) -> f64 {
        self.lhs_err.hypot(self.rhs_err)
    }
}

/// Cross-validates the branching population against the single-path
/// expectation. Both sides estimate the mean number of particles in
/// `window` at time `t`; the identity makes them mutual oracles.
pub fn many_to_one_check(
    env: &EnvironmentSpec,
    t: f64,
    window: (f64, f64),
    trials: u64,
    seed: u64,
) -> Result<ManyToOneReport> {
    if !(t > 0.0 && t <= 4.0) {
        return Err(Error::config(
            "population side is run without pruning; t must lie in (0, 4]",
        ));
    }
    if !(env.mu.is_constant_eq(0.0) && env.sigma.is_constant_eq(1.0)) {
        return Err(Error::config(
            "the single-path side integrates over Brownian motion; drift and volatility must be trivial",
        ));
    }
    if trials == 0 {
        return Err(Error::config("many-to-one check needs at least one trial"));
    }
    let (a, b) = window;
    let engine = Engine::new(env, MAX_DT)?;

    let lhs_samples: Vec<f64> = run_trials(trials, |k| {
        engine
            .run(t, PruneConfig::unpruned(), &mut trial_rng(seed, k))
            .map(|snap| {
                snap.particles
                    .iter()
                    .filter(|p| a <= p.position && p.position <= b)
                    .count() as f64
            })
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let steps = (t / QUADRATURE_DT).ceil() as usize;
    let h = t / steps as f64;
    let sqrt_h = h.sqrt();
    let rhs_samples: Vec<f64> = run_trials(trials, |k| {
        let mut rng = trial_rng(seed, trials + k);
        let mut x = 0.0f64;
        let mut integral = 0.0;
        let mut g_prev = env.g.eval(x);
        for _ in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            x += sqrt_h * z;
            let g_next = env.g.eval(x);
            integral += 0.5 * (g_prev + g_next) * h;
            g_prev = g_next;
        }
        if a <= x && x <= b {
            integral.exp()
        } else {
            0.0
        }
    });

    let (lhs, lhs_err) = mean_stderr(&lhs_samples);
    let (rhs, rhs_err) = mean_stderr(&rhs_samples);
    Ok(ManyToOneReport {
        lhs,
        lhs_err,
        rhs,
        rhs_err,
    })
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::PeriodicFunction;

    fn unit_env() -> EnvironmentSpec {
        EnvironmentSpec::classic(PeriodicFunction::constant(1.0, 1.0))
    }

    #[test]
    fn zero_horizon_is_a_single_particle_at_origin() {
        let snap = simulate_bbm(&unit_env(), 0.0, 1e-3, PruneConfig::default(), 9).unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(snap.particles[0].position, 0.0);
        assert_eq!(snap.max_position, 0.0);
        assert_eq!(snap.pruned_count, 0);
    }

    #[test]
    fn same_seed_same_population() {
        let env = unit_env();
        let a = simulate_bbm(&env, 3.0, 1e-3, PruneConfig::default(), 42).unwrap();
        let b = simulate_bbm(&env, 3.0, 1e-3, PruneConfig::default(), 42).unwrap();
        assert_eq!(a.particles, b.particles);
        let c = simulate_bbm(&env, 3.0, 1e-3, PruneConfig::default(), 43).unwrap();
        assert_ne!(a.particles, c.particles);
    }

    #[test]
    fn no_branch_probability_is_exponential() {
        // constant rate: thinning always accepts, so P(still one particle
        // at t) = exp(-beta t) exactly
        let env = unit_env();
        let t = 0.7;
        let trials = 4000u64;
        let singles = run_trials(trials, |k| {
            let snap = Engine::new(&env, 1e-3)
                .unwrap()
                .run(t, PruneConfig::default(), &mut trial_rng(4, k))
                .unwrap();
            (snap.len() == 1) as u32 as f64
        });
        let p_hat = singles.iter().sum::<f64>() / trials as f64;
        let p = (-t_rate(&env) * t).exp();
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (p_hat - p).abs() < 4.0 * se,
            "no-branch fraction {p_hat} vs exact {p} (se {se:.4})"
        );
    }

    fn t_rate(env: &EnvironmentSpec) -> f64 {
        env.beta()
    }

    #[test]
    fn mean_population_matches_constant_growth() {
        let env = unit_env();
        let t = 2.0;
        let trials = 3000u64;
        let sizes = run_trials(trials, |k| {
            Engine::new(&env, 1e-3)
                .unwrap()
                .run(t, PruneConfig::unpruned(), &mut trial_rng(11, k))
                .unwrap()
                .len() as f64
        });
        let (mean, se) = mean_stderr(&sizes);
        let expect = t.exp(); // binary splitting at unit rate
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "mean population {mean} vs {expect} (se {se:.3})"
        );
    }

    #[test]
    fn pruning_reports_and_respects_the_window() {
        let env = unit_env();
        let prune = PruneConfig {
            window: 1.5,
            hard_cap: 2_000_000,
        };
        let snap = simulate_bbm(&env, 6.0, 1e-3, prune, 5).unwrap();
        assert!(snap.pruned_count > 0, "tight window should discard laggards");
        for p in &snap.particles {
            assert!(p.position >= snap.max_position - prune.window - 1e-12);
        }
    }

    #[test]
    fn hard_cap_is_an_error_not_truncation() {
        let env = unit_env();
        let prune = PruneConfig {
            window: 50.0,
            hard_cap: 64,
        };
        let err = simulate_bbm(&env, 10.0, 1e-3, prune, 6).unwrap_err();
        assert!(err.to_string().contains("cap"), "{err}");
    }

    #[test]
    fn rejects_oversized_dt_and_drifting_env() {
        let env = unit_env();
        assert!(simulate_bbm(&env, 1.0, 0.5, PruneConfig::default(), 1).is_err());
        let drifting = EnvironmentSpec::new(
            PeriodicFunction::constant(1.0, 1.0),
            Some(PeriodicFunction::constant(1.0, 0.3)),
            None,
            None,
        )
        .unwrap();
        assert!(simulate_bbm(&drifting, 1.0, 1e-3, PruneConfig::default(), 1).is_err());
        assert!(simulate_diffusion_bbm(&drifting, 1.0, 1e-3, PruneConfig::default(), 1).is_ok());
    }

    #[test]
    fn diffusion_variant_reduces_to_classical_bitwise() {
        let env = unit_env();
        let a = simulate_bbm(&env, 2.5, 1e-3, PruneConfig::default(), 77).unwrap();
        let b = simulate_diffusion_bbm(&env, 2.5, 1e-3, PruneConfig::default(), 77).unwrap();
        assert_eq!(a.particles, b.particles);
        assert_eq!(a.pruned_count, b.pruned_count);
    }

    #[test]
    fn many_to_one_constant_rate_matches_closed_form() {
        let env = unit_env();
        let t = 2.0;
        let report = many_to_one_check(&env, t, (0.5, 1.5), 20_000, 21).unwrap();
        // rhs closed form: e^t P(B_t in window)
        let sd = t.sqrt();
        let phi = |x: f64| 0.5 * (1.0 + erf_approx(x / std::f64::consts::SQRT_2));
        let exact = t.exp() * (phi(1.5 / sd) - phi(0.5 / sd));
        assert!(
            (report.rhs - exact).abs() < 3.0 * report.rhs_err,
            "rhs {} vs closed form {exact} (se {})",
            report.rhs,
            report.rhs_err
        );
        assert!(
            (report.lhs - report.rhs).abs() < 3.0 * report.combined_err(),
            "lhs {} vs rhs {} (combined se {})",
            report.lhs,
            report.rhs,
            report.combined_err()
        );
    }

    // Abramowitz-Stegun 7.1.26, 1.5e-7 absolute error: plenty for a
    // 3-sigma statistical gate
    fn erf_approx(x: f64) -> f64 {
        let sign = x.signum();
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let poly = t
            * (0.254829592
                + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        sign * (1.0 - poly * (-x * x).exp())
    }

    #[test]
    fn empty_window_gives_zero_on_both_sides() {
        let report = many_to_one_check(&unit_env(), 1.0, (5.0, 4.0), 500, 3).unwrap();
        assert_eq!(report.lhs, 0.0);
        assert_eq!(report.rhs, 0.0);
    }
}
