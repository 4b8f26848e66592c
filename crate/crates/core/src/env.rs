//! Periodic environments: branching rate `g`, drift `mu`, volatility
//! `sigma`, and position-dependent offspring laws, plus the config grammar
//! that describes them.
//!
//! Spatial profiles are stored as uniform samples over one period. Linear
//! interpolation is the default working representation; a trigonometric mode
//! is available where spectral accuracy matters. Periodicity is exact:
//! evaluation reduces the argument with `rem_euclid`, so `f(x)` and
//! `f(x + period)` agree bitwise whenever `x + period` is itself exact.

mod expr;

pub use expr::Expr;

use crate::error::Error;
use crate::Result;
use serde::Deserialize;

/// Interpolation rule between grid samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    /// Trigonometric interpolation through the samples. Evaluation is O(n);
    /// intended for spectral-accuracy tests, not hot loops.
    Trigonometric,
}

/// Default number of samples per period for profiles given as expressions.
pub const DEFAULT_SAMPLES: usize = 1024;

/// Tail mass below which trailing offspring entries are folded away.
pub const OFFSPRING_TAIL_TOL: f64 = 1e-12;

/// A periodic function of one variable, sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct PeriodicFunction {
    period: f64,
    samples: Vec<f64>,
    interpolation: Interpolation,
    /// (a_k, b_k) cosine/sine coefficients, filled in trigonometric mode.
    fourier: Vec<(f64, f64)>,
}

impl PeriodicFunction {
    pub fn new(period: f64, samples: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::config(format!("period must be positive, got {period}")));
        }
        if samples.is_empty() {
            return Err(Error::config("profile needs at least one sample"));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::config(format!("non-finite profile sample {bad}")));
        }
        let fourier = match interpolation {
            Interpolation::Linear => Vec::new(),
            Interpolation::Trigonometric => dft(&samples),
        };
        Ok(PeriodicFunction {
            period,
            samples,
            interpolation,
            fourier,
        })
    }

    pub fn constant(period: f64, value: f64) -> Self {
        PeriodicFunction::new(period, vec![value], Interpolation::Linear)
            .expect("constant profile is always valid")
    }

    pub fn from_expression(
        period: f64,
        source: &str,
        n_samples: usize,
        interpolation: Interpolation,
    ) -> Result<Self> {
        let ast = expr::parse(source).map_err(Error::Config)?;
        if n_samples == 0 {
            return Err(Error::config("n_samples must be positive"));
        }
        let n = if ast.is_constant() { 1 } else { n_samples };
        let h = period / n as f64;
        let samples: Vec<f64> = (0..n).map(|j| ast.eval(j as f64 * h)).collect();
        PeriodicFunction::new(period, samples, interpolation)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Periodic reduction to `[0, period)`. Exact for exact arguments: uses
    /// the IEEE remainder, with a guard for the rounding case where a tiny
    /// negative argument wraps to `period` itself.
    #[inline]
    pub fn reduce(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.period);
        if r >= self.period {
            0.0
        } else {
            r
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let r = self.reduce(x);
        match self.interpolation {
            Interpolation::Linear => {
                let n = self.samples.len();
                if n == 1 {
                    return self.samples[0];
                }
                let u = r / self.period * n as f64;
                let mut i = u as usize;
                if i >= n {
                    i = n - 1;
                }
                let frac = u - i as f64;
                let a = self.samples[i];
                let b = self.samples[(i + 1) % n];
                a + frac * (b - a)
            }
            Interpolation::Trigonometric => {
                let n = self.samples.len();
                if n == 1 {
                    return self.samples[0];
                }
                let theta = 2.0 * std::f64::consts::PI * r / self.period;
                let mut acc = self.fourier[0].0;
                let half = n / 2;
                for k in 1..self.fourier.len() {
                    let (a, b) = self.fourier[k];
                    if a == 0.0 && b == 0.0 {
                        continue;
                    }
                    let (s, c) = (k as f64 * theta).sin_cos();
                    // Nyquist term of an even-length grid enters once.
                    let w = if n.is_multiple_of(2) && k == half { 1.0 } else { 2.0 };
                    acc += w * (a * c + b * s);
                }
                acc
            }
        }
    }

    /// (min, max) of the interpolant. Exact for linear mode; for the
    /// trigonometric mode the extrema are bracketed on an 8x refined grid.
    pub fn bounds(&self) -> (f64, f64) {
        match self.interpolation {
            Interpolation::Linear => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &s in &self.samples {
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                (lo, hi)
            }
            Interpolation::Trigonometric => {
                let n = self.samples.len().max(2) * 8;
                let h = self.period / n as f64;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for j in 0..n {
                    let v = self.eval(j as f64 * h);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            }
        }
    }

    /// True when every sample equals `value` exactly.
    pub fn is_constant_eq(&self, value: f64) -> bool {
        self.samples.iter().all(|&s| s == value)
    }

    /// Samples rotated left by `cells`, i.e. the profile `x -> f(x + s)`
    /// with `s = cells * period / n`. Used by shift-covariance checks.
    pub fn shifted_by_cells(&self, cells: usize) -> Self {
        let n = self.samples.len();
        let samples = (0..n).map(|j| self.samples[(j + cells) % n]).collect();
        PeriodicFunction::new(self.period, samples, self.interpolation)
            .expect("rotation preserves validity")
    }
}

fn dft(samples: &[f64]) -> Vec<(f64, f64)> {
    let n = samples.len();
    let m = n / 2;
    let mut coef = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let mut a = 0.0;
        let mut b = 0.0;
        for (j, &s) in samples.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            a += s * th.cos();
            b += s * th.sin();
        }
        coef.push((a / n as f64, b / n as f64));
    }
    // Zero out roundoff-level harmonics so eval can skip them; band-limited
    // profiles (the common case) then cost only their true harmonic count.
    let peak = coef
        .iter()
        .map(|(a, b)| a.abs().max(b.abs()))
        .fold(0.0f64, f64::max);
    for pair in coef.iter_mut() {
        if pair.0.abs().max(pair.1.abs()) <= 1e-14 * peak {
            *pair = (0.0, 0.0);
        }
    }
    coef
}

/// Position-dependent offspring law. `probs[cell][k]` is the probability of
/// `k` children at that cell of the period; deaths (`k = 0`) are excluded.
/// The continuous-time models additionally require zero mass on `k = 1`,
/// which is enforced where those models consume the law.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    period: f64,
    probs: Vec<Vec<f64>>,
}

impl OffspringLaw {
    pub fn new(period: f64, probs: Vec<Vec<f64>>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::config(format!("period must be positive, got {period}")));
        }
        if probs.is_empty() {
            return Err(Error::config("offspring law needs at least one position"));
        }
        let mut rows = Vec::with_capacity(probs.len());
        for (pos, row) in probs.into_iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::config(format!(
                    "offspring probabilities at position {pos} must be finite and nonnegative"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::config(format!(
                    "offspring probabilities at position {pos} sum to {sum}, expected 1 within 1e-12"
                )));
            }
            if row.first().copied().unwrap_or(0.0) > 0.0 {
                return Err(Error::config(format!(
                    "offspring law at position {pos} puts mass on zero children"
                )));
            }
            // Fold negligible tail mass into the last retained entry.
            let mut row = row;
            let mut folded = 0.0;
            while row.len() > 2 && row.last().copied().unwrap_or(1.0) < OFFSPRING_TAIL_TOL {
                folded += row.pop().unwrap();
            }
            if let Some(last) = row.last_mut() {
                *last += folded;
            }
            if row.iter().all(|&p| p == 0.0) {
                return Err(Error::config(format!("offspring law at position {pos} has no mass")));
            }
            rows.push(row);
        }
        Ok(OffspringLaw { period, probs: rows })
    }

    /// Deterministic binary branching, uniform in space.
    pub fn binary(period: f64) -> Self {
        OffspringLaw::new(period, vec![vec![0.0, 0.0, 1.0]]).expect("binary law is valid")
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_cells(&self) -> usize {
        self.probs.len()
    }

    /// Cell index for position `x` (piecewise-constant in space).
    #[inline]
    pub fn cell(&self, x: f64) -> usize {
        let m = self.probs.len();
        if m == 1 {
            return 0;
        }
        let r = x.rem_euclid(self.period);
        let r = if r >= self.period { 0.0 } else { r };
        let mut i = (r / self.period * m as f64) as usize;
        if i >= m {
            i = m - 1;
        }
        i
    }

    pub fn probs_at(&self, cell: usize) -> &[f64] {
        &self.probs[cell]
    }

    /// Mean number of children at `cell`.
    pub fn rho(&self, cell: usize) -> f64 {
        self.probs[cell]
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// Second factorial moment `E[k(k-1)]` at `cell`.
    pub fn kappa(&self, cell: usize) -> f64 {
        self.probs[cell]
            .iter()
            .enumerate()
            .map(|(k, p)| (k * k.saturating_sub(1)) as f64 * p)
            .sum()
    }

    pub fn rho_at(&self, x: f64) -> f64 {
        self.rho(self.cell(x))
    }

    /// (min, max) of the mean offspring count over cells.
    pub fn rho_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in 0..self.n_cells() {
            let r = self.rho(c);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        (lo, hi)
    }

    /// Largest child count with positive mass anywhere.
    pub fn max_children(&self) -> usize {
        self.probs
            .iter()
            .map(|row| row.iter().rposition(|&p| p > 0.0).unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// True if mass is concentrated on exactly two children everywhere.
    pub fn is_binary(&self) -> bool {
        self.probs
            .iter()
            .all(|row| row.iter().enumerate().all(|(k, &p)| (k == 2) == (p > 0.0)))
    }

    /// True if every cell has zero mass on a single child (required by the
    /// continuous-time branching models).
    pub fn no_single_child(&self) -> bool {
        self.probs.iter().all(|row| row.get(1).copied().unwrap_or(0.0) == 0.0)
    }

    /// Draw a child count at `cell` by inverse CDF.
    pub fn sample(&self, cell: usize, u: f64) -> usize {
        let row = &self.probs[cell];
        let mut acc = 0.0;
        for (k, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    /// Evaluate the offspring generating function `E[s^k]` at `cell`.
    pub fn pgf(&self, cell: usize, s: f64) -> f64 {
        let row = &self.probs[cell];
        let mut acc = 0.0;
        for &p in row.iter().rev() {
            acc = acc * s + p;
        }
        acc
    }
}

/// A complete model environment. `mu` and `sigma` matter only for the
/// diffusion variant; the classic model has `mu = 0`, `sigma = 1`.
#[derive(Debug, Clone)]
pub struct EnvironmentSpec {
    pub g: PeriodicFunction,
    pub mu: PeriodicFunction,
    pub sigma: PeriodicFunction,
    pub offspring: OffspringLaw,
}

impl EnvironmentSpec {
    pub fn new(
        g: PeriodicFunction,
        mu: Option<PeriodicFunction>,
        sigma: Option<PeriodicFunction>,
        offspring: Option<OffspringLaw>,
    ) -> Result<Self> {
        let period = g.period();
        let mu = mu.unwrap_or_else(|| PeriodicFunction::constant(period, 0.0));
        let sigma = sigma.unwrap_or_else(|| PeriodicFunction::constant(period, 1.0));
        let offspring = offspring.unwrap_or_else(|| OffspringLaw::binary(period));
        for (name, p) in [("mu", mu.period()), ("sigma", sigma.period())] {
            if p != period {
                return Err(Error::config(format!(
                    "{name} period {p} differs from g period {period}"
                )));
            }
        }
        if offspring.period() != period {
            return Err(Error::config("offspring period differs from g period"));
        }
        let (g_min, _) = g.bounds();
        if g_min <= 0.0 {
            return Err(Error::config(format!(
                "branching rate must be strictly positive, min is {g_min}"
            )));
        }
        let (s_min, _) = sigma.bounds();
        if s_min <= 0.0 {
            return Err(Error::config(format!(
                "sigma must be strictly positive, min is {s_min}"
            )));
        }
        Ok(EnvironmentSpec {
            g,
            mu,
            sigma,
            offspring,
        })
    }

    /// Classic model: unit diffusion, no drift, binary offspring.
    pub fn classic(g: PeriodicFunction) -> Self {
        EnvironmentSpec::new(g, None, None, None).expect("classic environment is valid")
    }

    pub fn period(&self) -> f64 {
        self.g.period()
    }

    /// Thinning majorant: max of `g` over the period.
    pub fn beta(&self) -> f64 {
        self.g.bounds().1
    }

    /// Effective branching coefficient `(rho(x) - 1) g(x)`.
    #[inline]
    pub fn growth_coeff(&self, x: f64) -> f64 {
        (self.offspring.rho_at(x) - 1.0) * self.g.eval(x)
    }

    /// True for unit volatility, zero drift and binary offspring.
    pub fn is_classic(&self) -> bool {
        self.mu.is_constant_eq(0.0) && self.sigma.is_constant_eq(1.0) && self.offspring.is_binary()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Num {
    I(i64),
    F(f64),
}

impl Num {
    fn as_f64(&self) -> f64 {
        match self {
            Num::I(v) => *v as f64,
            Num::F(v) => *v,
        }
    }
}

/// Profile entry in config: an expression string or explicit samples.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Expression(String),
    Samples(Vec<f64>),
}

impl ProfileSpec {
    fn build(
        &self,
        name: &str,
        period: f64,
        n_samples: usize,
        interpolation: Interpolation,
    ) -> Result<PeriodicFunction> {
        match self {
            ProfileSpec::Expression(src) => {
                PeriodicFunction::from_expression(period, src, n_samples, interpolation)
                    .map_err(|e| Error::config(format!("profile {name}: {e}")))
            }
            ProfileSpec::Samples(v) => PeriodicFunction::new(period, v.clone(), interpolation)
                .map_err(|e| Error::config(format!("profile {name}: {e}"))),
        }
    }
}

/// One offspring table row: the law at one position cell.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffspringEntry {
    pub position_index: usize,
    /// `probabilities[k]` is the probability of `k` children.
    pub probabilities: Vec<f64>,
}

/// Deserialized form of the environment config table. Unknown keys are
/// rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    period: Num,
    g: ProfileSpec,
    mu: Option<ProfileSpec>,
    sigma: Option<ProfileSpec>,
    offspring: Option<Vec<OffspringEntry>>,
}

impl EnvConfig {
    pub fn build(&self) -> Result<EnvironmentSpec> {
        self.build_with(DEFAULT_SAMPLES, Interpolation::Linear)
    }

    pub fn build_with(&self, n_samples: usize, interpolation: Interpolation) -> Result<EnvironmentSpec> {
        let period = self.period.as_f64();
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::config(format!("period must be positive, got {period}")));
        }
        let g = self.g.build("g", period, n_samples, interpolation)?;
        let mu = self
            .mu
            .as_ref()
            .map(|p| p.build("mu", period, n_samples, interpolation))
            .transpose()?;
        let sigma = self
            .sigma
            .as_ref()
            .map(|p| p.build("sigma", period, n_samples, interpolation))
            .transpose()?;
        let offspring = self.offspring.as_deref().map(|e| build_offspring(period, e)).transpose()?;
        EnvironmentSpec::new(g, mu, sigma, offspring)
    }
}

/// Builds a law from config rows keyed by `position_index`; the indices
/// must cover `0..entries.len()` exactly once.
pub fn offspring_from_entries(period: f64, entries: &[OffspringEntry]) -> Result<OffspringLaw> {
    build_offspring(period, entries)
}

fn build_offspring(period: f64, entries: &[OffspringEntry]) -> Result<OffspringLaw> {
    let m = entries.len();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; m];
    for e in entries {
        if e.position_index >= m {
            return Err(Error::config(format!(
                "offspring position_index {} out of range for {} entries",
                e.position_index, m
            )));
        }
        if rows[e.position_index].is_some() {
            return Err(Error::config(format!(
                "duplicate offspring position_index {}",
                e.position_index
            )));
        }
        rows[e.position_index] = Some(e.probabilities.clone());
    }
    let rows: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|r| r.expect("every index filled by the checks above"))
        .collect();
    OffspringLaw::new(period, rows)
}

/// Parses an environment description (TOML, keys `period`, `g`, `mu`,
/// `sigma`, `offspring`) into a validated [`EnvironmentSpec`] on the default
/// grid.
pub fn parse_env(config: &str) -> Result<EnvironmentSpec> {
    let cfg: EnvConfig = toml::from_str(config).map_err(|e| Error::config(e.to_string()))?;
    cfg.build()
}
