//! Command-line front end for the `perifront` crate.
//!
//! Every run that produces files writes them into the `--out` directory
//! together with a `manifest.json` recording the tool version, the resolved
//! parameters, the config text and the output list. Monte Carlo commands are
//! seeded, so a manifest is enough to reproduce a run byte for byte
//! (`simulate --from-manifest`).
//!
//! Exit codes: 0 on success, 2 for configuration mistakes (unreadable or
//! malformed config, invalid parameter combinations), 1 for everything else
//! including failed verification criteria.

// Guards are written `!(a < b)` on purpose: the negation also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use perifront::bbm::{max_samples, PruneConfig};
use perifront::brw::simulate_brw;
use perifront::env::{
    offspring_from_entries, EnvConfig, EnvironmentSpec, OffspringEntry, OffspringLaw,
    DEFAULT_SAMPLES,
};
use perifront::eigen::{
    brw_front_params, find_front_params, gamma_curve, BrwModel, FrontParams, DEFAULT_MIN_TOL,
};
use perifront::fkpp::{
    solve_general_fkpp, track_front_with, FrontFit, FrontTrack, GridConfig, DEFAULT_FIT_RANGE,
    STABILITY_SAFETY,
};
use perifront::report::{
    fmt_f64, write_brw_csv, write_gamma_csv, write_json, write_samples_csv, write_tail_csv,
    RunManifest,
};
use perifront::stats::{
    ks_distance, median, nu_profile, subsequence_times, tail_fit, PrefactorModel,
};
use perifront::verify::{run_suite, Suite, VerifyEnvs};
use perifront::{Error, Result};

#[derive(Parser)]
#[command(
    name = "perifront",
    version,
    about = "Branching particle systems and reaction fronts in periodic media"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep the tilt exponent and report the front constants
    Eigen(EigenArgs),
    /// Monte Carlo runs of the branching models, one CSV row per trial
    Simulate(SimulateArgs),
    /// Integrate the reaction front and fit its speed and log delay
    Pde(PdeArgs),
    /// Statistics over sample files and front-constant derived quantities
    #[command(subcommand)]
    Stats(StatsCmd),
    /// Run the built-in consistency suite
    Verify(VerifyArgs),
}

#[derive(Args)]
struct EigenArgs {
    /// TOML config with an [env] table
    #[arg(long)]
    config: PathBuf,
    /// Sweep grid for the tilt, as LO:HI:STEP
    #[arg(long, value_name = "LO:HI:STEP")]
    lambda_grid: Option<String>,
    /// Spatial grid size for the sweep
    #[arg(long)]
    n_grid: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Model {
    /// Classical branching Brownian motion (unit volatility, no drift)
    Bbm,
    /// Branching diffusion with periodic drift and volatility
    Diffusion,
    /// Lattice branching random walk
    Brw,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config with an [env] table ([brw] table for the lattice model)
    #[arg(long, required_unless_present = "from_manifest")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// Horizon: continuous time for the diffusions, whole generations for brw
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Kill particles more than this far behind the running maximum
    #[arg(long)]
    prune_window: Option<f64>,
    /// Euler-Maruyama substep for the diffusion model
    #[arg(long)]
    dt: Option<f64>,
    /// Reproduce a previous run from its manifest (flags still override)
    #[arg(long, value_name = "MANIFEST", conflicts_with = "config")]
    from_manifest: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PdeArgs {
    /// TOML config with an [env] table
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    t_end: Option<f64>,
    /// Cell width; must divide the period exactly
    #[arg(long)]
    dx: Option<f64>,
    /// Level whose rightmost crossing defines the front, in [0.1, 0.9]
    #[arg(long)]
    level: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum StatsCmd {
    /// Fit an exponential tail to a sample column
    Tail(TailArgs),
    /// Two-sample Kolmogorov-Smirnov distance between sample columns
    Ks(KsArgs),
    /// Times at which the front centering has a fixed fractional part
    Times(TimesArgs),
    /// Periodic tail-prefactor profile along a time grid (expensive)
    Profile(ProfileArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum TailModel {
    /// Survival ~ C exp(-lambda y)
    Pure,
    /// Survival ~ C y exp(-lambda y)
    Y,
}

impl From<TailModel> for PrefactorModel {
    fn from(m: TailModel) -> PrefactorModel {
        match m {
            TailModel::Pure => PrefactorModel::PureExponential,
            TailModel::Y => PrefactorModel::YTimesExponential,
        }
    }
}

#[derive(Args)]
struct TailArgs {
    /// CSV file holding the samples
    #[arg(long)]
    input: PathBuf,
    /// Column to fit
    #[arg(long, default_value = "centered")]
    column: String,
    #[arg(long)]
    y_min: f64,
    #[arg(long)]
    y_max: f64,
    /// Assumed prefactor shape in front of the exponential
    #[arg(long, value_enum, default_value_t = TailModel::Pure)]
    model: TailModel,
    /// Optional output directory (fit.json plus the binned curve)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KsArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value = "centered")]
    column: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TimesArgs {
    /// TOML config with an [env] table
    #[arg(long)]
    config: PathBuf,
    /// Target fractional part in [0, 1)
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 20.0)]
    t_min: f64,
    #[arg(long, default_value_t = 30)]
    count: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    /// TOML config with an [env] table
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated sampling times
    #[arg(long, value_name = "T1,T2,...")]
    times: String,
    /// Tail offset above the centering
    #[arg(long, default_value_t = 8.0)]
    y: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 6.5)]
    prune_window: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which checks to run
    #[arg(value_parser = parse_suite)]
    suite: Suite,
    /// Optional directory for report.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory of <name>.toml files overriding the built-in environments
    #[arg(long)]
    config_dir: Option<PathBuf>,
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    Suite::from_str(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Eigen(a) => cmd_eigen(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Pde(a) => cmd_pde(a),
        Cmd::Stats(s) => match s {
            StatsCmd::Tail(a) => cmd_stats_tail(a),
            StatsCmd::Ks(a) => cmd_stats_ks(a),
            StatsCmd::Times(a) => cmd_stats_times(a),
            StatsCmd::Profile(a) => cmd_stats_profile(a),
        },
        Cmd::Verify(a) => cmd_verify(a),
    }
}

// ---------------------------------------------------------------- config --

/// Everything a run config may contain. Environment and experiment tables
/// are all optional so one file can drive several subcommands.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    env: Option<EnvConfig>,
    #[serde(default)]
    simulate: SimulateTable,
    #[serde(default)]
    eigen: EigenTable,
    #[serde(default)]
    pde: PdeTable,
    brw: Option<BrwTable>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SimulateTable {
    model: Option<Model>,
    t: Option<f64>,
    trials: Option<u64>,
    seed: Option<u64>,
    prune_window: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EigenTable {
    lambda_min: Option<f64>,
    lambda_max: Option<f64>,
    lambda_step: Option<f64>,
    n_grid: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PdeTable {
    t_end: Option<f64>,
    dx: Option<f64>,
    level: Option<f64>,
    fit_min: Option<f64>,
    fit_max: Option<f64>,
}

/// Site-indexed jump probabilities of the lattice walk, one entry per site
/// of the period. Offspring rows default to deterministic binary splitting.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BrwTable {
    p_left: Vec<f64>,
    p_stay: Vec<f64>,
    p_right: Vec<f64>,
    offspring: Option<Vec<OffspringEntry>>,
}

fn load_config(path: &Path) -> Result<(FileConfig, String)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg = toml::from_str(&text)
        .map_err(|e| Error::config(format!("config {}: {e}", path.display())))?;
    Ok((cfg, text))
}

fn require_env(cfg: &FileConfig, origin: &str) -> Result<EnvironmentSpec> {
    match &cfg.env {
        Some(ec) => ec.build(),
        None => Err(Error::config(format!("config {origin} has no [env] table"))),
    }
}

fn build_brw_model(cfg: &FileConfig, origin: &str) -> Result<BrwModel> {
    let table = cfg.brw.as_ref().ok_or_else(|| {
        Error::config(format!(
            "config {origin} has no [brw] table; the lattice model needs p_left, p_stay, p_right"
        ))
    })?;
    let l = table.p_left.len();
    if table.p_stay.len() != l || table.p_right.len() != l {
        return Err(Error::config(
            "p_left, p_stay and p_right must have one entry per site of the period",
        ));
    }
    let offspring = match &table.offspring {
        Some(rows) => offspring_from_entries(l as f64, rows)?,
        None => OffspringLaw::binary(l as f64),
    };
    BrwModel::new(
        table.p_left.clone(),
        table.p_stay.clone(),
        table.p_right.clone(),
        offspring,
    )
}

// -------------------------------------------------------------- manifest --

fn write_manifest(
    out_dir: &Path,
    config: Option<(&str, &str)>,
    seed: Option<u64>,
    resolved: serde_json::Value,
    t0: Instant,
    files: &[&str],
) -> Result<()> {
    let mut outputs: Vec<String> = files.iter().map(|s| s.to_string()).collect();
    outputs.push("manifest.json".to_string());
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: std::env::args().collect::<Vec<_>>().join(" "),
        config_path: config.map(|(p, _)| p.to_string()),
        config_text: config.map(|(_, t)| t.to_string()),
        seed,
        resolved,
        wall_secs: t0.elapsed().as_secs_f64(),
        outputs,
    };
    manifest.save(&out_dir.join("manifest.json"))
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))
}

// ----------------------------------------------------------------- eigen --

fn cmd_eigen(args: EigenArgs) -> Result<u8> {
    let t0 = Instant::now();
    let (cfg, text) = load_config(&args.config)?;
    let origin = args.config.display().to_string();

    // Lattice-only configs skip the sweep and just report the constants.
    if cfg.env.is_none() && cfg.brw.is_some() {
        let model = build_brw_model(&cfg, &origin)?;
        let fp = brw_front_params(&model, DEFAULT_MIN_TOL)?;
        ensure_out(&args.out)?;
        write_json(&args.out.join("front_params.json"), &fp)?;
        write_manifest(
            &args.out,
            Some((&origin, &text)),
            None,
            serde_json::json!({ "model": "brw" }),
            t0,
            &["front_params.json"],
        )?;
        print_front_params(&fp);
        return Ok(0);
    }
    let env = require_env(&cfg, &origin)?;

    let (lo, hi, step) = match &args.lambda_grid {
        Some(s) => parse_grid_spec(s)?,
        None => (
            cfg.eigen.lambda_min.unwrap_or(0.1),
            cfg.eigen.lambda_max.unwrap_or(5.0),
            cfg.eigen.lambda_step.unwrap_or(0.1),
        ),
    };
    let lambdas = build_lambda_grid(lo, hi, step)?;
    let n_grid = args.n_grid.or(cfg.eigen.n_grid).unwrap_or(DEFAULT_SAMPLES);

    let points = gamma_curve(&env, &lambdas, n_grid)?;
    let fp = find_front_params(&env, DEFAULT_MIN_TOL)?;

    ensure_out(&args.out)?;
    write_gamma_csv(&args.out.join("gamma.csv"), &points)?;
    write_json(&args.out.join("front_params.json"), &fp)?;
    let resolved = serde_json::json!({
        "lambda_lo": lo, "lambda_hi": hi, "lambda_step": step, "n_grid": n_grid,
    });
    write_manifest(
        &args.out,
        Some((&origin, &text)),
        None,
        resolved,
        t0,
        &["gamma.csv", "front_params.json"],
    )?;

    print_front_params(&fp);
    Ok(0)
}

fn print_front_params(fp: &FrontParams) {
    if fp.attained {
        println!(
            "lambda_star = {}, v_star = {}, log_coeff = {}",
            fmt_f64(fp.lambda_star.unwrap_or(f64::NAN)),
            fmt_f64(fp.v_star.unwrap_or(f64::NAN)),
            fmt_f64(fp.log_coeff.unwrap_or(f64::NAN)),
        );
    } else {
        println!("speed functional has no interior minimum; front constants undefined");
    }
}

fn parse_grid_spec(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::config(format!("lambda grid `{s}` must look like LO:HI:STEP"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut nums = [0.0f64; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| bad())?;
    }
    Ok((nums[0], nums[1], nums[2]))
}

fn build_lambda_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite() && lo > 0.0 && step > 0.0 && hi > lo)
    {
        return Err(Error::config(format!(
            "lambda grid {lo}:{hi}:{step} must satisfy 0 < lo < hi with a positive step"
        )));
    }
    let count = ((hi - lo) / step).round() as usize + 1;
    if count > 5000 {
        return Err(Error::config(format!(
            "lambda grid would have {count} points; cap is 5000"
        )));
    }
    let mut grid: Vec<f64> = (0..count)
        .map(|k| lo + k as f64 * step)
        .filter(|&x| x <= hi * (1.0 + 1e-12))
        .collect();
    grid.dedup();
    Ok(grid)
}

// -------------------------------------------------------------- simulate --

/// Fully resolved simulation parameters; stored in the manifest so a run
/// can be reproduced without the original command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimResolved {
    model: Model,
    t: f64,
    trials: u64,
    seed: u64,
    /// None keeps the wide default window for the diffusions and the
    /// 8-site window for the lattice walk.
    prune_window: Option<f64>,
    dt: f64,
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8> {
    let t0 = Instant::now();
    let (origin, text, cfg, mut resolved) = match &args.from_manifest {
        Some(mpath) => {
            let manifest = RunManifest::load(mpath)?;
            let resolved: SimResolved =
                serde_json::from_value(manifest.resolved.clone()).map_err(|_| {
                    Error::config(format!(
                        "manifest {} was not produced by `simulate`",
                        mpath.display()
                    ))
                })?;
            let text = manifest.config_text.clone().ok_or_else(|| {
                Error::config(format!("manifest {} carries no config text", mpath.display()))
            })?;
            let cfg: FileConfig = toml::from_str(&text).map_err(|e| {
                Error::config(format!("config embedded in {}: {e}", mpath.display()))
            })?;
            let origin = manifest
                .config_path
                .clone()
                .unwrap_or_else(|| mpath.display().to_string());
            (origin, text, cfg, resolved)
        }
        None => {
            let path = args.config.as_ref().expect("clap enforces config");
            let (cfg, text) = load_config(path)?;
            let sim = &cfg.simulate;
            let model = args.model.or(sim.model).unwrap_or(Model::Bbm);
            let resolved = SimResolved {
                model,
                t: sim.t.unwrap_or(match model {
                    Model::Brw => 100.0,
                    _ => 20.0,
                }),
                trials: sim.trials.unwrap_or(1000),
                seed: sim.seed.unwrap_or(0),
                prune_window: sim.prune_window,
                dt: sim.dt.unwrap_or(1e-3),
            };
            (path.display().to_string(), text, cfg, resolved)
        }
    };

    // Command-line flags win over both the config file and the manifest.
    if let Some(m) = args.model {
        resolved.model = m;
    }
    if let Some(t) = args.t {
        resolved.t = t;
    }
    if let Some(n) = args.trials {
        resolved.trials = n;
    }
    if let Some(s) = args.seed {
        resolved.seed = s;
    }
    if let Some(w) = args.prune_window {
        resolved.prune_window = Some(w);
    }
    if let Some(dt) = args.dt {
        resolved.dt = dt;
    }

    ensure_out(&args.out)?;
    let csv = args.out.join("samples.csv");
    let written;
    match resolved.model {
        Model::Bbm | Model::Diffusion => {
            let env = require_env(&cfg, &origin)?;
            if resolved.model == Model::Bbm
                && !(env.mu.is_constant_eq(0.0) && env.sigma.is_constant_eq(1.0))
            {
                return Err(Error::config(
                    "environment has drift or non-unit volatility; use --model diffusion",
                ));
            }
            let fp = find_front_params(&env, DEFAULT_MIN_TOL)?;
            let prune = match resolved.prune_window {
                Some(w) => PruneConfig {
                    window: w,
                    ..PruneConfig::default()
                },
                None => PruneConfig::default(),
            };
            let samples = max_samples(
                &env,
                &fp,
                resolved.t,
                resolved.trials,
                resolved.dt,
                prune,
                resolved.seed,
            )?;
            write_samples_csv(&csv, resolved.t, &samples)?;
            written = samples.len();
            if let Ok(med) = median(&samples.iter().map(|s| s.centered).collect::<Vec<_>>()) {
                println!("median centered maximum {}", fmt_f64(med));
            }
        }
        Model::Brw => {
            let model = build_brw_model(&cfg, &origin)?;
            let n_gen = as_generations(resolved.t)?;
            let window = as_lattice_window(resolved.prune_window.unwrap_or(8.0))?;
            let samples = simulate_brw(&model, n_gen, window, resolved.trials, resolved.seed)?;
            write_brw_csv(&csv, n_gen, &samples)?;
            written = samples.len();
            if let Ok(med) = median(&samples.iter().map(|s| s.centered).collect::<Vec<_>>()) {
                println!("median centered maximum {}", fmt_f64(med));
            }
        }
    }

    write_manifest(
        &args.out,
        Some((&origin, &text)),
        Some(resolved.seed),
        serde_json::to_value(&resolved)?,
        t0,
        &["samples.csv"],
    )?;
    println!("wrote {written} samples to {}", csv.display());
    Ok(0)
}

/// The lattice model runs in discrete generations, so the shared horizon
/// flag must carry a whole number.
fn as_generations(t: f64) -> Result<u32> {
    if !(t.is_finite() && t >= 1.0 && t <= u32::MAX as f64 && t.fract() == 0.0) {
        return Err(Error::config(format!(
            "lattice model runs in whole generations; got t = {t}"
        )));
    }
    Ok(t as u32)
}

fn as_lattice_window(w: f64) -> Result<u32> {
    if !(w.is_finite() && (2.0..=1e6).contains(&w) && w.fract() == 0.0) {
        return Err(Error::config(format!(
            "lattice prune window must be a whole number of sites >= 2, got {w}"
        )));
    }
    Ok(w as u32)
}

// ------------------------------------------------------------------- pde --

fn cmd_pde(args: PdeArgs) -> Result<u8> {
    let t0 = Instant::now();
    let (cfg, text) = load_config(&args.config)?;
    let origin = args.config.display().to_string();
    let env = require_env(&cfg, &origin)?;

    let t_end = args.t_end.or(cfg.pde.t_end).unwrap_or(400.0);
    let dx = args.dx.or(cfg.pde.dx).unwrap_or(1.0 / 32.0);
    let level = args.level.or(cfg.pde.level).unwrap_or(0.5);
    let fit_lo = cfg.pde.fit_min.unwrap_or(DEFAULT_FIT_RANGE.0);
    let fit_hi_req = cfg.pde.fit_max.unwrap_or(DEFAULT_FIT_RANGE.1);
    let fit_hi = fit_hi_req.min(t_end);
    if !(fit_lo < fit_hi) {
        return Err(Error::config(format!(
            "fit range outside solution: [{fit_lo}, {fit_hi_req}] needs data past t = {fit_lo} \
             but the run ends at t = {t_end}"
        )));
    }

    let (_, sig_hi) = env.sigma.bounds();
    let gc = GridConfig {
        dx,
        dt: STABILITY_SAFETY * dx * dx / (2.0 * sig_hi * sig_hi),
        window_width: 80.0,
        left_pad: 25.0,
    };
    let sol = solve_general_fkpp(&env, t_end, &gc)?;
    let track = track_front_with(&sol, level, (fit_lo, fit_hi))?;

    ensure_out(&args.out)?;
    write_track_csv(&args.out.join("track.csv"), &track)?;
    let report = PdeReport {
        t_end,
        dx,
        level,
        fit: track.fitted.clone(),
        clamp_count: sol.clamp_count,
        clamp_worst: sol.clamp_worst,
    };
    write_json(&args.out.join("front.json"), &report)?;
    let resolved = serde_json::json!({
        "t_end": t_end, "dx": dx, "level": level, "fit_lo": fit_lo, "fit_hi": fit_hi,
    });
    write_manifest(
        &args.out,
        Some((&origin, &text)),
        None,
        resolved,
        t0,
        &["track.csv", "front.json"],
    )?;

    println!(
        "v_hat = {}, c_log_hat = {} over [{fit_lo}, {fit_hi}]",
        fmt_f64(track.fitted.v_hat),
        fmt_f64(track.fitted.c_log_hat),
    );
    Ok(0)
}

#[derive(Serialize)]
struct PdeReport {
    t_end: f64,
    dx: f64,
    level: f64,
    #[serde(flatten)]
    fit: FrontFit,
    /// Cells nudged back into [0, 1] by the solver and the worst excursion.
    clamp_count: u64,
    clamp_worst: f64,
}

fn write_track_csv(path: &Path, track: &FrontTrack) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,position")?;
    for (t, x) in track.times.iter().zip(&track.positions) {
        writeln!(w, "{},{}", fmt_f64(*t), fmt_f64(*x))?;
    }
    Ok(w.flush()?)
}

// ----------------------------------------------------------------- stats --

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config(format!("{} is empty", path.display())))?;
    let idx = header
        .split(',')
        .position(|h| h.trim() == column)
        .ok_or_else(|| {
            Error::config(format!(
                "{} has no column `{column}` (header: {header})",
                path.display()
            ))
        })?;
    let mut vals = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let field = line.split(',').nth(idx).ok_or_else(|| {
            Error::config(format!("{}:{}: too few fields", path.display(), ln + 2))
        })?;
        let v: f64 = field.trim().parse().map_err(|_| {
            Error::config(format!(
                "{}:{}: `{field}` is not a number",
                path.display(),
                ln + 2
            ))
        })?;
        vals.push(v);
    }
    Ok(vals)
}

fn cmd_stats_tail(args: TailArgs) -> Result<u8> {
    let t0 = Instant::now();
    let samples = read_column(&args.input, &args.column)?;
    let fit = tail_fit(&samples, args.y_min, args.y_max, args.model.into())?;
    println!(
        "lambda_hat = {} (r2 = {:.4}, {} grid points)",
        fmt_f64(fit.lambda_hat),
        fit.r2,
        fit.y_grid.len()
    );
    if let Some(out) = &args.out {
        ensure_out(out)?;
        write_json(&out.join("fit.json"), &fit)?;
        write_tail_csv(&out.join("tail.csv"), &fit)?;
        let resolved = serde_json::json!({
            "input": args.input.display().to_string(), "column": args.column,
            "y_min": args.y_min, "y_max": args.y_max,
            "model": format!("{:?}", args.model),
        });
        write_manifest(out, None, None, resolved, t0, &["fit.json", "tail.csv"])?;
    }
    Ok(0)
}

fn cmd_stats_ks(args: KsArgs) -> Result<u8> {
    let t0 = Instant::now();
    let a = read_column(&args.a, &args.column)?;
    let b = read_column(&args.b, &args.column)?;
    let d = ks_distance(&a, &b)?;
    let report = serde_json::json!({
        "ks_distance": d, "n_a": a.len(), "n_b": b.len(),
    });
    println!("{report}");
    if let Some(out) = &args.out {
        ensure_out(out)?;
        write_json(&out.join("ks.json"), &report)?;
        let resolved = serde_json::json!({
            "a": args.a.display().to_string(), "b": args.b.display().to_string(),
            "column": args.column,
        });
        write_manifest(out, None, None, resolved, t0, &["ks.json"])?;
    }
    Ok(0)
}

fn cmd_stats_times(args: TimesArgs) -> Result<u8> {
    let t0 = Instant::now();
    let (cfg, text) = load_config(&args.config)?;
    let origin = args.config.display().to_string();
    let env = require_env(&cfg, &origin)?;
    let fp = find_front_params(&env, DEFAULT_MIN_TOL)?;
    let spec = subsequence_times(&fp, args.p, args.t_min, args.count)?;
    for t in &spec.times {
        println!("{}", fmt_f64(*t));
    }
    if let Some(out) = &args.out {
        ensure_out(out)?;
        write_json(&out.join("times.json"), &spec)?;
        let resolved = serde_json::json!({
            "p": args.p, "t_min": args.t_min, "count": args.count,
        });
        write_manifest(
            out,
            Some((&origin, &text)),
            None,
            resolved,
            t0,
            &["times.json"],
        )?;
    }
    Ok(0)
}

fn cmd_stats_profile(args: ProfileArgs) -> Result<u8> {
    let t0 = Instant::now();
    let (cfg, text) = load_config(&args.config)?;
    let origin = args.config.display().to_string();
    let env = require_env(&cfg, &origin)?;
    let fp = find_front_params(&env, DEFAULT_MIN_TOL)?;

    let mut t_grid = Vec::new();
    for part in args.times.split(',') {
        let t: f64 = part.trim().parse().map_err(|_| {
            Error::config(format!("`{part}` in --times is not a number"))
        })?;
        t_grid.push(t);
    }
    let prune = PruneConfig {
        window: args.prune_window,
        ..PruneConfig::default()
    };
    let points = nu_profile(
        &env, &fp, &t_grid, args.y, args.trials, args.dt, prune, args.seed,
    )?;

    ensure_out(&args.out)?;
    write_json(&args.out.join("profile.json"), &points)?;
    write_profile_csv(&args.out.join("profile.csv"), &points)?;
    let resolved = serde_json::json!({
        "times": t_grid, "y": args.y, "trials": args.trials,
        "dt": args.dt, "prune_window": args.prune_window, "seed": args.seed,
    });
    write_manifest(
        &args.out,
        Some((&origin, &text)),
        Some(args.seed),
        resolved,
        t0,
        &["profile.json", "profile.csv"],
    )?;

    for p in &points {
        println!(
            "t = {:9.3}  phase = {:.4}  nu_hat = {} +- {}",
            p.t,
            p.phase,
            fmt_f64(p.nu_hat),
            fmt_f64(p.stderr)
        );
    }
    Ok(0)
}

fn write_profile_csv(path: &Path, points: &[perifront::stats::NuPoint]) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,phase,nu_hat,stderr,hits")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(p.t),
            fmt_f64(p.phase),
            fmt_f64(p.nu_hat),
            fmt_f64(p.stderr),
            p.hits
        )?;
    }
    Ok(w.flush()?)
}

// ---------------------------------------------------------------- verify --

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let t0 = Instant::now();
    let envs = match &args.config_dir {
        Some(dir) => VerifyEnvs::with_overrides(dir.clone()),
        None => VerifyEnvs::builtin(),
    };
    let report = run_suite(args.suite, &envs);
    for outcome in &report.outcomes {
        println!("{}", outcome.summary_line());
    }
    println!(
        "suite {}: {} ({:.1} s)",
        report.suite,
        if report.all_passed { "PASS" } else { "FAIL" },
        report.wall_secs
    );
    if let Some(out) = &args.out {
        ensure_out(out)?;
        write_json(&out.join("report.json"), &report)?;
        let resolved = serde_json::json!({
            "suite": report.suite,
            "config_dir": args.config_dir.as_ref().map(|d| d.display().to_string()),
        });
        write_manifest(out, None, None, resolved, t0, &["report.json"])?;
    }
    Ok(if report.all_passed { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_grid_spec_round_trips() {
        let (lo, hi, step) = parse_grid_spec("0.5:2.0:0.5").unwrap();
        let grid = build_lambda_grid(lo, hi, step).unwrap();
        assert_eq!(grid, vec![0.5, 1.0, 1.5, 2.0]);
        assert!(parse_grid_spec("0.5:2.0").is_err());
        assert!(build_lambda_grid(2.0, 1.0, 0.1).is_err());
        assert!(build_lambda_grid(0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn generation_horizon_must_be_integral() {
        assert_eq!(as_generations(100.0).unwrap(), 100);
        assert!(as_generations(20.5).is_err());
        assert!(as_generations(0.0).is_err());
        assert!(as_lattice_window(6.0).is_ok());
        assert!(as_lattice_window(1.0).is_err());
        assert!(as_lattice_window(4.5).is_err());
    }

    #[test]
    fn config_tables_stay_optional() {
        let cfg: FileConfig = toml::from_str("").unwrap();
        assert!(cfg.env.is_none());
        let cfg: FileConfig = toml::from_str(
            "[env]\nperiod = 1.0\ng = \"1\"\n\n[simulate]\ntrials = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.simulate.trials, Some(10));
        assert!(toml::from_str::<FileConfig>("[typo]\nx = 1\n").is_err());
    }
}
