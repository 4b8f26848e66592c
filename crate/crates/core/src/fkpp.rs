//! Reaction-diffusion front solver in a periodic medium.
//!
//! Integrates the invasion field on a moving window with Heaviside data and
//! tracks the level sets of the front. The field solved here is the
//! complemented reflection `w(t, x) = 1 - u(t, -x)` of the extinction-type
//! quantity attached to the particle system, so the tracked front invades
//! rightward and its asymptotic speed equals the `v*` produced by the
//! spectral machinery for the same environment:
//!
//! `w_t = (1/2) sigma~^2 w_xx + mu~ w_x + g~ (1 - w - pgf~(1 - w))`
//!
//! with `sigma~(x) = sigma(-x)`, `mu~(x) = -mu(-x)`, `g~(x) = g(-x)` and the
//! offspring generating function evaluated at the cell of `-x`. Binary
//! offspring reduces the reaction to the logistic `g~ w (1 - w)`.

use serde::Serialize;

use crate::env::EnvironmentSpec;
use crate::{Error, Result};

/// Safety factor applied to the explicit diffusion stability bound.
pub const STABILITY_SAFETY: f64 = 0.9;

/// Internal level used to keep the front centred in the window.
const CENTER_LEVEL: f64 = 0.5;

/// Cells of clearance demanded between the tracked front and a window edge.
const EDGE_GUARD: usize = 8;

/// Spatial and temporal resolution of a front run.
#[derive(Debug, Clone, Serialize)]
pub struct GridConfig {
    /// Cell width; must divide the environment period exactly.
    pub dx: f64,
    /// Time step; capped by `STABILITY_SAFETY * dx^2 / (2 max sigma^2)`. The
    /// solver may shrink it slightly so frame times land on whole steps.
    pub dt: f64,
    /// Length of the moving window; at least 40.
    pub window_width: f64,
    /// Initial distance from the left edge to the Heaviside interface.
    pub left_pad: f64,
}

impl GridConfig {
    /// Spec defaults: dx = period/64 scaled to unit cells of 1/64, stability
    /// time step, window 80 with the interface a third of the way in.
    pub fn defaults(env: &EnvironmentSpec) -> GridConfig {
        let dx = env.period() / (64.0 * env.period()).round().max(1.0);
        let (_, sig_hi) = env.sigma.bounds();
        let dt = STABILITY_SAFETY * dx * dx / (2.0 * sig_hi * sig_hi);
        GridConfig {
            dx,
            dt,
            window_width: 80.0,
            left_pad: 25.0,
        }
    }

    fn validate(&self, env: &EnvironmentSpec) -> Result<(usize, usize)> {
        if !(self.dx > 0.0) {
            return Err(Error::config("dx must be positive"));
        }
        let period = env.period();
        let m = (period / self.dx).round();
        if m < 1.0 || ((period / self.dx) - m).abs() > 1e-9 * m {
            return Err(Error::config(format!(
                "dx = {} must divide the period {period} exactly",
                self.dx
            )));
        }
        let (_, sig_hi) = env.sigma.bounds();
        let dt_max = STABILITY_SAFETY * self.dx * self.dx / (2.0 * sig_hi * sig_hi);
        if !(self.dt > 0.0) || self.dt > dt_max * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "dt = {} violates the diffusion stability bound {dt_max:.6e}",
                self.dt
            )));
        }
        if !(self.window_width >= 40.0) {
            return Err(Error::config("window_width must be at least 40"));
        }
        if !(self.left_pad > 2.0 && self.left_pad < self.window_width - 2.0) {
            return Err(Error::config("left_pad must fall inside the window"));
        }
        let n_win = (self.window_width / self.dx).round() as usize;
        if ((self.window_width / self.dx) - n_win as f64).abs() > 1e-9 * n_win as f64 {
            return Err(Error::config("window_width must be a whole number of cells"));
        }
        Ok((m as usize, n_win))
    }
}

/// When to store full solution frames. Times are snapped to whole steps; the
/// coarse cadence applies before `dense_from`, the dense cadence after. A
/// dense tail keeps time interpolation honest in the pulsating-shift check
/// without storing the entire run at high rate.
#[derive(Debug, Clone)]
pub struct FrameSchedule {
    pub coarse_dt: f64,
    pub dense_from: f64,
    pub dense_dt: f64,
}

impl FrameSchedule {
    pub fn coarse(coarse_dt: f64) -> FrameSchedule {
        FrameSchedule {
            coarse_dt,
            dense_from: f64::INFINITY,
            dense_dt: coarse_dt,
        }
    }

    pub fn with_dense_tail(coarse_dt: f64, dense_from: f64, dense_dt: f64) -> FrameSchedule {
        FrameSchedule {
            coarse_dt,
            dense_from,
            dense_dt,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.coarse_dt > 0.0 && self.dense_dt > 0.0) {
            return Err(Error::config("frame cadences must be positive"));
        }
        let ratio = self.coarse_dt / self.dense_dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::config(
                "coarse frame cadence must be a multiple of the dense cadence",
            ));
        }
        Ok(())
    }
}

/// Full history of a front run. `frames[i]` holds the window values at
/// `times[i]`; cell `j` of frame `i` sits at absolute position
/// `(window_offsets[i] + j) * dx`.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub times: Vec<f64>,
    pub window_offsets: Vec<i64>,
    pub frames: Vec<Vec<f64>>,
    pub dx: f64,
    pub dt: f64,
    /// Cells per period of the medium.
    pub cells_per_period: usize,
    /// Dirichlet ghost values (behind, ahead), taken from the far-field
    /// limits of the initial profile.
    pub boundary: (f64, f64),
    /// Number of values nudged back into [0, 1] by more than 1e-10, with the
    /// worst excursion seen.
    pub clamp_count: u64,
    pub clamp_worst: f64,
}

/// One frame interpolated in time, aligned to absolute cell indices.
#[derive(Debug, Clone)]
pub struct SampledFrame {
    pub offset: i64,
    pub values: Vec<f64>,
}

impl SampledFrame {
    pub fn value_at_cell(&self, a: i64) -> Option<f64> {
        let j = a - self.offset;
        if j < 0 || j as usize >= self.values.len() {
            None
        } else {
            Some(self.values[j as usize])
        }
    }
}

impl PdeSolution {
    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    /// Invader mass relative to a fixed origin: the window integral plus the
    /// saturated cells the window has moved past on the left.
    pub fn absolute_mass(&self, i: usize) -> f64 {
        let sum: f64 = self.frames[i].iter().sum();
        self.dx * (sum + self.window_offsets[i] as f64)
    }

    /// Linear time interpolation between stored frames, restricted to the
    /// absolute cells both bracketing frames cover.
    pub fn sample_at(&self, t: f64) -> Result<SampledFrame> {
        let (first, last) = match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::config("solution holds no frames")),
        };
        if t < first - 1e-9 || t > last + 1e-9 {
            return Err(Error::config(format!(
                "time {t} outside stored range [{first}, {last}]"
            )));
        }
        let hi = self.times.partition_point(|&s| s < t - 1e-12).min(self.times.len() - 1);
        let lo = hi.saturating_sub(1);
        if hi == lo || (self.times[hi] - t).abs() < 1e-12 {
            return Ok(SampledFrame {
                offset: self.window_offsets[hi],
                values: self.frames[hi].clone(),
            });
        }
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let a = (t - t0) / (t1 - t0);
        let (o0, o1) = (self.window_offsets[lo], self.window_offsets[hi]);
        let n = self.frames[lo].len() as i64;
        let start = o0.max(o1);
        let end = (o0 + n).min(o1 + n);
        if end <= start {
            return Err(Error::numerics("bracketing frames do not overlap"));
        }
        let values = (start..end)
            .map(|cell| {
                let v0 = self.frames[lo][(cell - o0) as usize];
                let v1 = self.frames[hi][(cell - o1) as usize];
                (1.0 - a) * v0 + a * v1
            })
            .collect();
        Ok(SampledFrame {
            offset: start,
            values,
        })
    }
}

/// Reflected, mod-period coefficient tables for the solved field.
struct Medium {
    m: usize,
    /// (1/2) sigma~^2 per cell of the period grid.
    half_s2: Vec<f64>,
    mu: Vec<f64>,
    g: Vec<f64>,
    cell_id: Vec<usize>,
    binary: bool,
}

impl Medium {
    fn new(env: &EnvironmentSpec, dx: f64, m: usize) -> Medium {
        let period = env.period();
        let mut half_s2 = Vec::with_capacity(m);
        let mut mu = Vec::with_capacity(m);
        let mut g = Vec::with_capacity(m);
        let mut cell_id = Vec::with_capacity(m);
        for k in 0..m {
            // profile values at -x for absolute x = k dx, reduced periodically
            let xr = (period - k as f64 * dx) % period;
            half_s2.push(0.5 * env.sigma.eval(xr).powi(2));
            mu.push(-env.mu.eval(xr));
            g.push(env.g.eval(xr));
            cell_id.push(env.offspring.cell(xr));
        }
        Medium {
            m,
            half_s2,
            mu,
            g,
            cell_id,
            binary: env.offspring.is_binary(),
        }
    }
}

struct Stepper<'a> {
    env: &'a EnvironmentSpec,
    med: Medium,
    dx: f64,
    n: usize,
    /// Absolute cell index of window cell 0.
    offset: i64,
    /// Dirichlet ghost values (behind, ahead).
    ghost: (f64, f64),
    /// Fused per-window-cell coefficients, rebuilt on recentre.
    diff: Vec<f64>,
    adv: Vec<f64>,
    g: Vec<f64>,
    cell: Vec<usize>,
    clamp_count: u64,
    clamp_worst: f64,
}

impl<'a> Stepper<'a> {
    fn new(
        env: &'a EnvironmentSpec,
        med: Medium,
        dx: f64,
        n: usize,
        offset: i64,
        ghost: (f64, f64),
    ) -> Stepper<'a> {
        let mut s = Stepper {
            env,
            med,
            dx,
            n,
            offset,
            ghost,
            diff: vec![0.0; n],
            adv: vec![0.0; n],
            g: vec![0.0; n],
            cell: vec![0; n],
            clamp_count: 0,
            clamp_worst: 0.0,
        };
        s.rebuild_tables();
        s
    }

    fn rebuild_tables(&mut self) {
        let m = self.med.m as i64;
        for j in 0..self.n {
            let k = (self.offset + j as i64).rem_euclid(m) as usize;
            self.diff[j] = self.med.half_s2[k] / (self.dx * self.dx);
            self.adv[j] = self.med.mu[k] / (2.0 * self.dx);
            self.g[j] = self.med.g[k];
            self.cell[j] = self.med.cell_id[k];
        }
    }

    fn reaction(&self, j: usize, w: f64) -> f64 {
        if self.med.binary {
            self.g[j] * w * (1.0 - w)
        } else {
            self.g[j] * (1.0 - w - self.env.offspring.pgf(self.cell[j], 1.0 - w))
        }
    }

    /// Right-hand side with Dirichlet ghosts at both window edges.
    fn rhs(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let left = if j == 0 { self.ghost.0 } else { w[j - 1] };
            let right = if j == n - 1 { self.ghost.1 } else { w[j + 1] };
            out[j] = self.diff[j] * (left - 2.0 * w[j] + right)
                + self.adv[j] * (right - left)
                + self.reaction(j, w[j]);
        }
    }

    fn clamp(&mut self, w: &mut [f64]) {
        for v in w.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-10 {
                    self.clamp_count += 1;
                    self.clamp_worst = self.clamp_worst.max(-*v);
                }
                *v = 0.0;
            } else if *v > 1.0 {
                if *v > 1.0 + 1e-10 {
                    self.clamp_count += 1;
                    self.clamp_worst = self.clamp_worst.max(*v - 1.0);
                }
                *v = 1.0;
            }
        }
    }

    /// Rightmost crossing of the centring level, as a window cell index.
    fn front_cell(&self, w: &[f64]) -> Option<usize> {
        if *w.last()? >= CENTER_LEVEL && self.ghost.1 < CENTER_LEVEL {
            return Some(self.n - 1);
        }
        (0..self.n - 1)
            .rev()
            .find(|&j| w[j] >= CENTER_LEVEL && w[j + 1] < CENTER_LEVEL)
    }

    /// Keeps the tracked level inside the middle third by whole-period
    /// window shifts; freshly exposed cells take their Dirichlet values.
    ///
    /// Shifting by period multiples pins the distance from the front to the
    /// absorbing right edge, so the truncation-induced speed deficit stays
    /// constant in time instead of oscillating with each recentre, and the
    /// coefficient tables are unchanged (offset mod period is invariant).
    fn recenter(&mut self, w: &mut [f64]) -> Result<()> {
        let Some(jf) = self.front_cell(w) else {
            return Ok(()); // uniform state, nothing to centre on
        };
        if jf < EDGE_GUARD || jf + EDGE_GUARD >= self.n {
            return Err(Error::simulation(
                "front reached the window edge; widen the window or shorten the run",
            ));
        }
        let m = self.med.m;
        let mid = self.n / 2;
        if jf > mid + m {
            let s = m * ((jf - mid) / m);
            w.copy_within(s.., 0);
            for v in w[self.n - s..].iter_mut() {
                *v = self.ghost.1;
            }
            self.offset += s as i64;
            self.rebuild_tables();
        } else if jf + 2 * m < mid {
            let s = m * ((mid - jf) / m);
            w.copy_within(..self.n - s, s);
            for v in w[..s].iter_mut() {
                *v = self.ghost.0;
            }
            self.offset -= s as i64;
            self.rebuild_tables();
        }
        Ok(())
    }
}

/// Heun (explicit trapezoid) integration of the front field starting from a
/// caller-supplied profile of absolute position.
pub fn solve_with_initial(
    env: &EnvironmentSpec,
    t_end: f64,
    gc: &GridConfig,
    schedule: &FrameSchedule,
    initial: impl Fn(f64) -> f64,
) -> Result<PdeSolution> {
    let (m, n_win) = gc.validate(env)?;
    schedule.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::config("t_end must be positive"));
    }

    // Shrink dt so the dense frame cadence is a whole number of steps.
    let steps_per_dense = (schedule.dense_dt / gc.dt).ceil().max(1.0);
    let dt = schedule.dense_dt / steps_per_dense;
    let steps_per_dense = steps_per_dense as u64;
    let dense_per_coarse = (schedule.coarse_dt / schedule.dense_dt).round() as u64;
    let total_steps = (t_end / dt).ceil() as u64;

    let offset0 = -((gc.left_pad / gc.dx).round() as i64);
    let med = Medium::new(env, gc.dx, m);
    let ghost = (
        initial((offset0 - 1) as f64 * gc.dx).clamp(0.0, 1.0),
        initial((offset0 + n_win as i64) as f64 * gc.dx).clamp(0.0, 1.0),
    );
    let mut st = Stepper::new(env, med, gc.dx, n_win, offset0, ghost);

    let mut w: Vec<f64> = (0..n_win)
        .map(|j| {
            let x = (offset0 + j as i64) as f64 * gc.dx;
            initial(x).clamp(0.0, 1.0)
        })
        .collect();

    let mut times = Vec::new();
    let mut offsets = Vec::new();
    let mut frames = Vec::new();
    let mut record = |t: f64, offset: i64, w: &[f64]| {
        times.push(t);
        offsets.push(offset);
        frames.push(w.to_vec());
    };
    record(0.0, st.offset, &w);

    let mut k1 = vec![0.0; n_win];
    let mut mid = vec![0.0; n_win];
    let mut k2 = vec![0.0; n_win];
    for step in 1..=total_steps {
        st.rhs(&w, &mut k1);
        for j in 0..n_win {
            mid[j] = w[j] + dt * k1[j];
        }
        st.rhs(&mid, &mut k2);
        for j in 0..n_win {
            w[j] += 0.5 * dt * (k1[j] + k2[j]);
        }
        st.clamp(&mut w);

        if step % 16 == 0 {
            st.recenter(&mut w)?;
        }
        if step % steps_per_dense == 0 {
            let t = step as f64 * dt;
            let dense_index = step / steps_per_dense;
            if t >= schedule.dense_from - 1e-9 || dense_index.is_multiple_of(dense_per_coarse) {
                record(t, st.offset, &w);
            }
        }
    }

    Ok(PdeSolution {
        times,
        window_offsets: offsets,
        frames,
        dx: gc.dx,
        dt,
        cells_per_period: m,
        boundary: ghost,
        clamp_count: st.clamp_count,
        clamp_worst: st.clamp_worst,
    })
}

/// Classic-model front run with Heaviside data.
pub fn solve_fkpp(env: &EnvironmentSpec, t_end: f64, gc: &GridConfig) -> Result<PdeSolution> {
    if !env.is_classic() {
        return Err(Error::unsupported(
            "classic front solver needs unit volatility, zero drift and binary offspring",
        ));
    }
    solve_general_fkpp(env, t_end, gc)
}

/// Variable-coefficient front run with the offspring-polynomial reaction.
pub fn solve_general_fkpp(env: &EnvironmentSpec, t_end: f64, gc: &GridConfig) -> Result<PdeSolution> {
    solve_general_fkpp_with(env, t_end, gc, &FrameSchedule::coarse(0.25))
}

pub fn solve_general_fkpp_with(
    env: &EnvironmentSpec,
    t_end: f64,
    gc: &GridConfig,
    schedule: &FrameSchedule,
) -> Result<PdeSolution> {
    solve_with_initial(env, t_end, gc, schedule, |x| if x <= 0.0 { 1.0 } else { 0.0 })
}

/// Least-squares front fit `x(t) = v t - c log t + b`.
#[derive(Debug, Clone, Serialize)]
pub struct FrontFit {
    pub v_hat: f64,
    pub c_log_hat: f64,
    pub b_hat: f64,
    pub fit_range: (f64, f64),
}

/// Level-crossing history of a solution.
#[derive(Debug, Clone, Serialize)]
pub struct FrontTrack {
    pub level: f64,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub positions: Vec<f64>,
    #[serde(flatten)]
    pub fitted: FrontFit,
}

pub const DEFAULT_FIT_RANGE: (f64, f64) = (50.0, 400.0);

/// Rightmost level crossing per frame plus a t-weighted least-squares fit
/// over the default range, clipped to the solved span.
pub fn track_front(sol: &PdeSolution, level: f64) -> Result<FrontTrack> {
    let hi = sol.times.last().copied().unwrap_or(0.0);
    track_front_with(sol, level, (DEFAULT_FIT_RANGE.0, DEFAULT_FIT_RANGE.1.min(hi)))
}

pub fn track_front_with(
    sol: &PdeSolution,
    level: f64,
    fit_range: (f64, f64),
) -> Result<FrontTrack> {
    if !(0.1..=0.9).contains(&level) {
        return Err(Error::config("tracking level must lie in [0.1, 0.9]"));
    }
    let mut times = Vec::new();
    let mut positions = Vec::new();
    for i in 0..sol.n_frames() {
        let w = &sol.frames[i];
        let n = w.len();
        // rightmost crossing, with the right Dirichlet ghost as final cell
        let mut pos = None;
        if w[n - 1] >= level && sol.boundary.1 < level {
            let frac = (w[n - 1] - level) / (w[n - 1] - sol.boundary.1);
            pos = Some((sol.window_offsets[i] + (n - 1) as i64) as f64 * sol.dx + frac * sol.dx);
        } else {
            for j in (0..n - 1).rev() {
                if w[j] >= level && w[j + 1] < level {
                    let frac = (w[j] - level) / (w[j] - w[j + 1]);
                    pos =
                        Some((sol.window_offsets[i] + j as i64) as f64 * sol.dx + frac * sol.dx);
                    break;
                }
            }
        }
        if let Some(p) = pos {
            times.push(sol.times[i]);
            positions.push(p);
        }
    }
    if times.is_empty() {
        return Err(Error::numerics(format!("level {level} never crossed")));
    }
    let fitted = fit_front(&times, &positions, fit_range)?;
    Ok(FrontTrack {
        level,
        times,
        positions,
        fitted,
    })
}

/// t-weighted least squares for (v, c, b) on basis (t, -log t, 1).
fn fit_front(times: &[f64], positions: &[f64], range: (f64, f64)) -> Result<FrontFit> {
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    let mut count = 0usize;
    for (&t, &x) in times.iter().zip(positions) {
        if t < range.0 || t > range.1 || t <= 0.0 {
            continue;
        }
        let basis = [t, -t.ln(), 1.0];
        let weight = t;
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += weight * basis[r] * basis[c];
            }
            atb[r] += weight * basis[r] * x;
        }
        count += 1;
    }
    if count < 4 {
        return Err(Error::config(format!(
            "front fit needs at least 4 frames in [{}, {}], found {count}",
            range.0, range.1
        )));
    }
    let sol = solve3(ata, atb)?;
    Ok(FrontFit {
        v_hat: sol[0],
        c_log_hat: sol[1],
        b_hat: sol[2],
        fit_range: range,
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Result<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::numerics("singular normal equations in front fit"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..3 {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Ok([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}

/// Pulsating-shift defect: sup over the common window of
/// `|w(t0 + period/v, x + period) - w(t0, x)|`, the spatial shift exact on
/// the grid and the time samples linearly interpolated between frames.
pub fn pulsating_residual(sol: &PdeSolution, v: f64, t0: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::config("pulsating check needs a positive speed"));
    }
    let m = sol.cells_per_period as i64;
    let period = m as f64 * sol.dx;
    let f0 = sol.sample_at(t0)?;
    let f1 = sol.sample_at(t0 + period / v)?;

    // Trim a few periods from the window edges to stay clear of the
    // Dirichlet boundary influence.
    let trim = 4 * m;
    let start = (f0.offset + trim).max(f1.offset - m + trim);
    let end = (f0.offset + f0.values.len() as i64 - trim)
        .min(f1.offset + f1.values.len() as i64 - m - trim);
    if end <= start {
        return Err(Error::config(
            "frames do not overlap after the pulsating shift; widen the window",
        ));
    }
    let mut sup = 0.0f64;
    for a in start..end {
        let w0 = f0.value_at_cell(a).unwrap();
        let w1 = f1.value_at_cell(a + m).unwrap();
        sup = sup.max((w1 - w0).abs());
    }
    Ok(sup)
}
