//! Estimators that connect raw simulation output to the limit theory:
//! tail-exponent fits, fixed-fractional-part time subsequences, two-sample
//! distribution distance, and the periodic tail-prefactor profile.

use serde::{Deserialize, Serialize};

use crate::bbm::{max_samples, PruneConfig};
use crate::eigen::{front_position, solve_eigenpair, FrontParams};
use crate::env::EnvironmentSpec;
use crate::error::Error;
use crate::Result;

/// Number of survival grid points a tail fit starts from; points with fewer
/// than [`MIN_HITS`] surviving samples are dropped from the regression.
const TAIL_GRID: usize = 20;

/// Minimum surviving sample count for a grid point to enter the fit.
pub const MIN_HITS: usize = 50;

/// Fewest usable grid points for a meaningful slope.
const MIN_FIT_POINTS: usize = 4;

/// Shape assumed for the survival prefactor when regressing the tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefactorModel {
    /// `P(M > y) ~ C e^{-lambda y}`.
    PureExponential,
    /// `P(M > y) ~ C y e^{-lambda y}`, the shape carrying the extra factor
    /// of `y` in front of the exponential tail.
    YTimesExponential,
}

/// Weighted linear fit of a log-survival curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Grid points that actually entered the regression.
    pub y_grid: Vec<f64>,
    /// `ln P_hat(sample >= y)` at those points.
    pub log_survival: Vec<f64>,
    /// Negated fitted slope of the model's linearised tail.
    pub lambda_hat: f64,
    pub prefactor_model: PrefactorModel,
    /// Weighted coefficient of determination of the linear fit.
    pub r2: f64,
}

/// Times along which the front centering has a fixed fractional part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceSpec {
    /// Target fractional part in `[0, 1)`.
    pub p: f64,
    /// Ascending solutions of `frac(m_t) = p`.
    pub times: Vec<f64>,
}

/// One phase point of the periodic tail-prefactor estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuPoint {
    /// Time the samples were taken at.
    pub t: f64,
    /// Fractional phase of `m_t + y` in the period.
    pub phase: f64,
    /// Tail probability divided by the `psi(0) y e^{-lambda y}` normalizer.
    pub nu_hat: f64,
    /// Monte Carlo standard error on the same scale.
    pub stderr: f64,
    /// Number of samples beyond the threshold.
    pub hits: u64,
}

/// Fits the tail exponent of `samples` over `[y_min, y_max]`.
///
/// Survival probabilities are evaluated on a fixed grid; each retained point
/// must have at least [`MIN_HITS`] samples beyond it, and the weighted least
/// squares uses those counts as Poisson weights. For the
/// `y_times_exponential` model the regression linearises `ln(P/y)`, so
/// `y_min` must be positive there.
pub fn tail_fit(
    samples: &[f64],
    y_min: f64,
    y_max: f64,
    model: PrefactorModel,
) -> Result<TailFit> {
    if samples.len() < 10_000 {
        return Err(Error::config(format!(
            "tail fit needs at least 10000 samples, got {}",
            samples.len()
        )));
    }
    if !(y_min < y_max && y_min.is_finite() && y_max.is_finite()) {
        return Err(Error::config("tail fit range must satisfy y_min < y_max"));
    }
    if model == PrefactorModel::YTimesExponential && y_min <= 0.0 {
        return Err(Error::config(
            "the y-weighted model divides by y; the fit range must be positive",
        ));
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();

    let h = (y_max - y_min) / TAIL_GRID as f64;
    let mut ys = Vec::new();
    let mut logs = Vec::new();
    let mut weights = Vec::new();
    for j in 0..=TAIL_GRID {
        let y = y_min + j as f64 * h;
        // Count of samples >= y via binary search on the sorted array.
        let hits = n - sorted.partition_point(|&v| v < y);
        if hits < MIN_HITS {
            break;
        }
        let survival = hits as f64 / n as f64;
        let value = match model {
            PrefactorModel::PureExponential => survival.ln(),
            PrefactorModel::YTimesExponential => (survival / y).ln(),
        };
        ys.push(y);
        logs.push(value);
        weights.push(hits as f64);
    }
    if ys.len() < MIN_FIT_POINTS {
        return Err(Error::numerics(format!(
            "insufficient tail mass: only {} usable grid points in [{y_min}, {y_max}]",
            ys.len()
        )));
    }

    let wsum: f64 = weights.iter().sum();
    let xbar = ys.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let ybar = logs.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>() / wsum;
    let sxx: f64 = ys
        .iter()
        .zip(&weights)
        .map(|(x, w)| w * (x - xbar).powi(2))
        .sum();
    let sxy: f64 = ys
        .iter()
        .zip(&weights)
        .zip(&logs)
        .map(|((x, w), v)| w * (x - xbar) * (v - ybar))
        .sum();
    if sxx <= 0.0 {
        return Err(Error::numerics("degenerate tail grid"));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_tot: f64 = logs
        .iter()
        .zip(&weights)
        .map(|(v, w)| w * (v - ybar).powi(2))
        .sum();
    let ss_res: f64 = ys
        .iter()
        .zip(&weights)
        .zip(&logs)
        .map(|((x, w), v)| w * (v - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(TailFit {
        y_grid: ys,
        log_survival: logs,
        lambda_hat: -slope,
        prefactor_model: model,
        r2,
    })
}

/// Successive times `t > t_min` at which `frac(m_t) = p`, found by bisection
/// on the strictly increasing centering `m_t`.
pub fn subsequence_times(
    fp: &FrontParams,
    p: f64,
    t_min: f64,
    count: usize,
) -> Result<SubsequenceSpec> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config("target fractional part must lie in [0, 1)"));
    }
    if count == 0 {
        return Err(Error::config("need at least one subsequence time"));
    }
    let lambda = fp.lambda_star()?;
    let v = fp.v_star()?;
    // m_t' = v - 3/(2 lambda t) > 0 needs t above this threshold.
    let threshold = 1.5 / (lambda * v);
    if !(t_min >= 2.0 && t_min > threshold) {
        return Err(Error::config(format!(
            "t_min = {t_min} is below the monotonicity threshold (need >= 2 and > {threshold:.6})"
        )));
    }

    let m = |t: f64| front_position(fp, t).expect("attained params evaluated above");
    let mut times = Vec::with_capacity(count);
    let mut lo = t_min;
    let mut m_lo = m(lo);
    let mut k = (m_lo - p).ceil();
    for _ in 0..count {
        let target = k + p;
        // Expand the bracket past the target, then bisect.
        let mut hi = lo + (target - m_lo).max(0.0) / v + 1.0;
        let mut m_hi = m(hi);
        while m_hi < target {
            hi += 1.0 / v;
            m_hi = m(hi);
        }
        let mut a = lo;
        let mut b = hi;
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if m(mid) < target {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-13 * b.max(1.0) {
                break;
            }
        }
        let t = 0.5 * (a + b);
        times.push(t);
        lo = t;
        m_lo = m(lo);
        k += 1.0;
    }
    Ok(SubsequenceSpec { p, times })
}

/// Two-sample Kolmogorov-Smirnov statistic, `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance(samples_a: &[f64], samples_b: &[f64]) -> Result<f64> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(Error::config("KS distance needs nonempty samples"));
    }
    let mut a: Vec<f64> = samples_a.to_vec();
    let mut b: Vec<f64> = samples_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Median of a sample (average of the middle pair for even sizes).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::config("median of an empty sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Estimates the periodic tail prefactor at the phases carried by `t_grid`.
///
/// For each time the branching process is run from a single particle at the
/// origin and the tail probability `P(M_t > m_t + y)` is divided by
/// `psi(0) y e^{-lambda y}` with the mass-one eigenfunction at the
/// minimising tilt. Grid times use seeds `seed`, `seed+1`, ... so the phase
/// points are independent.
#[allow(clippy::too_many_arguments)]
pub fn nu_profile(
    env: &EnvironmentSpec,
    fp: &FrontParams,
    t_grid: &[f64],
    y: f64,
    trials: u64,
    dt: f64,
    prune: PruneConfig,
    seed: u64,
) -> Result<Vec<NuPoint>> {
    if !(y >= 3.0 && y.is_finite()) {
        return Err(Error::config("tail offset y must be >= 3"));
    }
    if trials < 100_000 {
        return Err(Error::config(
            "profile estimation needs at least 100000 trials per time",
        ));
    }
    if t_grid.is_empty() {
        return Err(Error::config("need at least one grid time"));
    }
    let lambda = fp.lambda_star()?;
    let ep = solve_eigenpair(env, lambda, 256)?;
    let psi0 = ep.psi.eval(0.0);
    let norm = psi0 * y * (-lambda * y).exp();
    if !(norm > 0.0) {
        return Err(Error::numerics("degenerate tail normalizer"));
    }
    let period = env.period();

    let mut out = Vec::with_capacity(t_grid.len());
    for (idx, &t) in t_grid.iter().enumerate() {
        let samples = max_samples(env, fp, t, trials, dt, prune, seed + idx as u64)?;
        let hits = samples.iter().filter(|s| s.centered > y).count() as u64;
        if (hits as usize) < MIN_HITS {
            return Err(Error::simulation(format!(
                "insufficient tail hits at t = {t}: {hits} samples beyond y = {y}"
            )));
        }
        let p = hits as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let phase = (front_position(fp, t)? + y).rem_euclid(period) / period;
        out.push(NuPoint {
            t,
            phase,
            nu_hat: p / norm,
            stderr: se / norm,
            hits,
        });
    }
    Ok(out)
}
