//! CSV and JSON emission plus the run manifest.
//!
//! Every floating-point column is printed with 17 significant digits, enough
//! for the decimal text to round-trip the exact f64, so a rerun with the
//! same seeds produces byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bbm::MaxSample;
use crate::brw::BrwSample;
use crate::eigen::GammaPoint;
use crate::stats::TailFit;
use crate::Result;

/// Shortest-exact decimal: 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Per-trial centered maxima of the continuous-time population.
/// Columns: `trial,t,M_t,centered,pruned_count`.
pub fn write_samples_csv(path: &Path, t: f64, samples: &[MaxSample]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "trial,t,M_t,centered,pruned_count")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.trial,
            fmt_f64(t),
            fmt_f64(s.raw),
            fmt_f64(s.centered),
            s.pruned
        )?;
    }
    Ok(w.flush()?)
}

/// Per-trial centered maxima of the lattice walk.
/// Columns: `trial,n,M_n,centered`.
pub fn write_brw_csv(path: &Path, n_gen: u32, samples: &[BrwSample]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "trial,n,M_n,centered")?;
    for s in samples {
        writeln!(w, "{},{},{},{}", s.trial, n_gen, s.max, fmt_f64(s.centered))?;
    }
    Ok(w.flush()?)
}

/// Eigenvalue sweep. Columns: `lambda,gamma,gamma_over_lambda,residual`.
pub fn write_gamma_csv(path: &Path, points: &[GammaPoint]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "lambda,gamma,gamma_over_lambda,residual")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(p.lambda),
            fmt_f64(p.gamma),
            fmt_f64(p.gamma_over_lambda),
            fmt_f64(p.residual)
        )?;
    }
    Ok(w.flush()?)
}

/// Binned tail points behind a fit. Columns: `y,log_survival`.
pub fn write_tail_csv(path: &Path, fit: &TailFit) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "y,log_survival")?;
    for (y, ls) in fit.y_grid.iter().zip(&fit.log_survival) {
        writeln!(w, "{},{}", fmt_f64(*y), fmt_f64(*ls))?;
    }
    Ok(w.flush()?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(w.flush()?)
}

/// Everything needed to reproduce a run: the config as read, the resolved
/// knobs after flag merging, and the seed. Rerunning from a manifest must
/// regenerate the listed outputs byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Subcommand that produced the outputs.
    pub command: String,
    pub config_path: Option<String>,
    /// Raw text of the config file at run time.
    pub config_text: Option<String>,
    pub seed: Option<u64>,
    /// Fully resolved parameters, flags already folded in.
    pub resolved: serde_json::Value,
    pub wall_secs: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for x in [
            0.0,
            1.0,
            -1.0,
            std::f64::consts::SQRT_2,
            1.0606601717798212,
            6.02e23,
            -3.9e-12,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn samples_csv_layout() {
        let dir = std::env::temp_dir().join("report_test_samples");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.csv");
        let samples = vec![MaxSample {
            trial: 0,
            raw: 2.5,
            centered: -0.5,
            pruned: 7,
        }];
        write_samples_csv(&path, 3.0, &samples).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("trial,t,M_t,centered,pruned_count"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,3.0000000000000000e0,"), "{row}");
        assert!(row.ends_with(",7"), "{row}");
        assert!(text.ends_with('\n'));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let dir = std::env::temp_dir().join("report_test_manifest");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.json");
        let m = RunManifest {
            tool_version: "0.1.0".into(),
            command: "simulate".into(),
            config_path: Some("env.toml".into()),
            config_text: Some("period = 1\ng = \"1\"\n".into()),
            seed: Some(42),
            resolved: serde_json::json!({"t": 3.0, "trials": 10}),
            wall_secs: 1.25,
            outputs: vec!["samples.csv".into()],
        };
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back.seed, Some(42));
        assert_eq!(back.resolved["trials"], 10);
        assert_eq!(back.outputs, m.outputs);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
