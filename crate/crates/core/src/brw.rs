//! Nearest-neighbour branching random walk on the integer lattice with
//! site-periodic kernel and offspring law.
//!
//! Populations are stored as counts per site inside a window below the
//! running maximum. One generation first draws offspring counts per site
//! (a multinomial over the offspring law) and then splits the children over
//! the three jump targets, so the cost per generation scales with the number
//! of occupied sites, not particles. The law is identical to per-particle
//! simulation because both stages are exchangeable across particles at the
//! same site.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::eigen::{brw_front_params, BrwModel, DEFAULT_MIN_TOL};
use crate::error::Error;
use crate::trials::{run_trials, trial_rng};
use crate::Result;

/// Total-count ceiling per trial. Counts live in u64 per site; the ceiling
/// keeps sums and offspring draws far from overflow and turns runaway
/// windows into a clean error.
const POPULATION_CAP: u64 = 1_000_000_000_000;

/// One generation of the pruned population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrwPopulation {
    pub generation: u32,
    /// `counts[i]` is the multiplicity at site `base + i`. All retained
    /// sites lie in `[max_position - window, max_position]`.
    pub base: i64,
    pub counts: Vec<u64>,
    pub max_position: i64,
}

impl BrwPopulation {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count_at(&self, position: i64) -> u64 {
        let idx = position - self.base;
        if idx < 0 || idx as usize >= self.counts.len() {
            0
        } else {
            self.counts[idx as usize]
        }
    }
}

/// One centered maximum draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrwSample {
    pub trial: u64,
    /// Rightmost occupied site at the final generation.
    pub max: i64,
    /// `max - m_n` with the centering from the lattice front constants.
    pub centered: f64,
}

/// Splits `count` draws over the categorical `probs` by chained binomials.
fn multinomial(count: u64, probs: &[f64], rng: &mut ChaCha8Rng, out: &mut [u64]) {
    debug_assert_eq!(probs.len(), out.len());
    let mut remaining = count;
    let mut mass_left = 1.0f64;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            out[k] = 0;
            continue;
        }
        if k + 1 == probs.len() || mass_left <= p {
            out[k] = remaining;
            remaining = 0;
            continue;
        }
        let q = (p / mass_left).clamp(0.0, 1.0);
        let draw = if q <= 0.0 {
            0
        } else if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q)
                .expect("validated ratio")
                .sample(rng)
        };
        out[k] = draw;
        remaining -= draw;
        mass_left -= p;
    }
}

fn site_class(model: &BrwModel, site: i64) -> usize {
    site.rem_euclid(model.l() as i64) as usize
}

/// Advances one generation in place. Children jump from the parent's site;
/// afterwards everything below `max - window` is dropped.
fn step(
    model: &BrwModel,
    pop: &mut BrwPopulation,
    window: u32,
    offspring_buf: &mut Vec<u64>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let n = pop.counts.len();
    let mut next = vec![0u64; n + 2];
    let next_base = pop.base - 1;
    for i in 0..n {
        let parents = pop.counts[i];
        if parents == 0 {
            continue;
        }
        let site = pop.base + i as i64;
        let class = site_class(model, site);

        let probs = model.offspring_at(class);
        offspring_buf.resize(probs.len(), 0);
        multinomial(parents, probs, rng, offspring_buf);
        let mut children = 0u64;
        for (k, &cnt) in offspring_buf.iter().enumerate() {
            children += cnt * k as u64;
        }
        if children == 0 {
            continue;
        }

        let jump = [
            model.p_left(class),
            model.p_stay(class),
            model.p_right(class),
        ];
        let mut split = [0u64; 3];
        multinomial(children, &jump, rng, &mut split);
        // Site x maps to indices x-1, x, x+1 relative to next_base.
        next[i] += split[0];
        next[i + 1] += split[1];
        next[i + 2] += split[2];
    }

    // Zero-child mass is rejected at construction, so the population can
    // only grow; an empty generation means a counting bug upstream.
    let Some(hi) = next.iter().rposition(|&c| c > 0) else {
        return Err(Error::numerics(format!(
            "population vanished in generation {}; offspring bookkeeping is broken",
            pop.generation + 1
        )));
    };
    let max_position = next_base + hi as i64;
    let floor = max_position - window as i64;
    let lo_keep = ((floor - next_base).max(0)) as usize;
    let mut counts: Vec<u64> = next[lo_keep..=hi].to_vec();
    let base = next_base + lo_keep as i64;
    // Leading zeros inside the window are harmless but cheap to drop.
    let first = counts.iter().position(|&c| c > 0).unwrap_or(0);
    if first > 0 {
        counts.drain(..first);
    }
    let total: u64 = counts.iter().sum();
    if total > POPULATION_CAP {
        return Err(Error::simulation(format!(
            "population {total} exceeds the tractable cap at generation {}; \
             shrink the prune window",
            pop.generation + 1
        )));
    }

    pop.generation += 1;
    pop.base = base + first as i64;
    pop.counts = counts;
    pop.max_position = max_position;
    Ok(())
}

fn check_window(window: u32) -> Result<()> {
    if window < 2 {
        return Err(Error::config(
            "prune window too small: need at least two lattice sites",
        ));
    }
    Ok(())
}

fn run_population_with(
    model: &BrwModel,
    n_gen: u32,
    window: u32,
    rng: &mut ChaCha8Rng,
) -> Result<BrwPopulation> {
    let mut pop = BrwPopulation {
        generation: 0,
        base: 0,
        counts: vec![1],
        max_position: 0,
    };
    let mut buf = Vec::new();
    for _ in 0..n_gen {
        step(model, &mut pop, window, &mut buf, rng)?;
    }
    Ok(pop)
}

/// Runs a single population for `n_gen` generations from one particle at
/// the origin. Uses the stream keyed by `(seed, 0)`, matching trial 0 of
/// [`simulate_brw`].
pub fn run_population(
    model: &BrwModel,
    n_gen: u32,
    prune_window: u32,
    seed: u64,
) -> Result<BrwPopulation> {
    check_window(prune_window)?;
    let mut rng = trial_rng(seed, 0);
    run_population_with(model, n_gen, prune_window, &mut rng)
}

/// Lattice centering `v n - 3/(2 lambda) log n` for the model's front
/// constants.
pub fn brw_centering(model: &BrwModel, n_gen: u32) -> Result<f64> {
    let fp = brw_front_params(model, DEFAULT_MIN_TOL)?;
    if !fp.attained {
        return Err(Error::unsupported(
            "minimizer not attained: the lattice speed functional has no \
             minimum, so centered sampling is undefined",
        ));
    }
    let v = fp.v_star()?;
    if v <= 0.0 {
        return Err(Error::unsupported(
            "nonpositive lattice speed; centered sampling is undefined",
        ));
    }
    let lambda = fp.lambda_star()?;
    Ok(v * n_gen as f64 - 1.5 / lambda * (n_gen as f64).ln())
}

/// Draws `trials` centered maxima `M_n - m_n` with per-trial keyed streams.
pub fn simulate_brw(
    model: &BrwModel,
    n_gen: u32,
    prune_window: u32,
    trials: u64,
    seed: u64,
) -> Result<Vec<BrwSample>> {
    check_window(prune_window)?;
    if n_gen == 0 {
        return Err(Error::config("need at least one generation"));
    }
    let m_n = brw_centering(model, n_gen)?;
    let runs = run_trials(trials, |k| {
        let mut rng = trial_rng(seed, k);
        run_population_with(model, n_gen, prune_window, &mut rng).map(|pop| BrwSample {
            trial: k,
            max: pop.max_position,
            centered: pop.max_position as f64 - m_n,
        })
    });
    runs.into_iter().collect()
}

/// Difference of median centered maxima between a window and its double,
/// the pruning-bias diagnostic. Both arms reuse the same seed, so the
/// comparison is paired trial by trial.
pub fn pruning_shift(
    model: &BrwModel,
    n_gen: u32,
    prune_window: u32,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    let narrow = simulate_brw(model, n_gen, prune_window, trials, seed)?;
    let wide = simulate_brw(model, n_gen, 2 * prune_window, trials, seed)?;
    let med = |s: &[BrwSample]| {
        crate::stats::median(&s.iter().map(|v| v.centered).collect::<Vec<_>>())
    };
    Ok(med(&narrow)? - med(&wide)?)
}
