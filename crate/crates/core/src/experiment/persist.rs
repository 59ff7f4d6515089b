use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ConvergenceRun, ExperimentConfig, GridComparison, LineFit, RateEstimate, RatePoint, Reference};
use crate::error::{Error, Result};
use crate::grid::GridKind;

const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistedFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub dat: PathBuf,
    pub svg: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct Summary {
    version: String,
    grid: GridKind,
    reference: Reference,
    exact: bool,
    slope: Option<f64>,
    intercept: Option<f64>,
    slope_std_error: Option<f64>,
    slope_mc_std_error: Option<f64>,
    residual_max: Option<f64>,
    master_seed: u64,
    config: ExperimentConfig,
}

fn stem(kind: GridKind) -> String {
    format!("rate_{kind}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `rate_<kind>.{csv,json,dat,svg}` into `dir`, creating it if
/// needed.
pub fn persist_results(run: &ConvergenceRun, cfg: &ExperimentConfig, dir: &Path) -> Result<PersistedFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = stem(run.kind);
    let files = PersistedFiles {
        csv: dir.join(format!("{stem}.csv")),
        json: dir.join(format!("{stem}.json")),
        dat: dir.join(format!("{stem}.dat")),
        svg: dir.join(format!("{stem}.svg")),
    };
    let est = &run.estimate;

    let mut csv = String::from("n,error,std_error\n");
    for p in &est.points {
        let _ = writeln!(csv, "{},{},{}", p.n, p.error, p.std_error);
    }
    write_file(&files.csv, &csv)?;

    let fit = est.fit;
    let summary = Summary {
        version: VERSION.to_owned(),
        grid: run.kind,
        reference: run.reference,
        exact: est.is_exact(),
        slope: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
        slope_std_error: fit.map(|f| f.slope_std_error),
        slope_mc_std_error: fit.map(|f| f.slope_mc_std_error),
        residual_max: fit.map(|f| f.residual_max),
        master_seed: cfg.master_seed,
        config: cfg.resolved()?,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Numerical(format!("cannot encode summary: {e}")))?;
    write_file(&files.json, &(json + "\n"))?;

    let mut dat = String::from("# n error std_error fit\n");
    for p in &est.points {
        let fitted = fit.map_or(f64::NAN, |f| (f.intercept + f.slope * (p.n as f64).ln()).exp());
        let _ = writeln!(dat, "{} {} {} {}", p.n, p.error, p.std_error, fitted);
    }
    write_file(&files.dat, &dat)?;

    write_file(&files.svg, &render_svg(run))?;
    Ok(files)
}

/// Persists both runs plus `comparison.csv`.
pub fn persist_comparison(
    cmp: &GridComparison,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<(PersistedFiles, PersistedFiles, PathBuf)> {
    let equi = persist_results(&cmp.equidistant, cfg, dir)?;
    let quad = persist_results(&cmp.quadratic, cfg, dir)?;
    let table = dir.join("comparison.csv");
    let mut buf = Vec::new();
    cmp.write_table(&mut buf).map_err(|e| Error::io(&table, e))?;
    fs::write(&table, buf).map_err(|e| Error::io(&table, e))?;
    Ok((equi, quad, table))
}

/// Reads back the estimate written by [`persist_results`] for `kind`.
pub fn load_results(dir: &Path, kind: GridKind) -> Result<RateEstimate> {
    let stem = stem(kind);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let format_err = |path: &Path, reason: String| Error::Format {
        path: path.to_owned(),
        reason,
    };

    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| format_err(&csv_path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| format_err(&csv_path, e.to_string()))?;
    if headers != vec!["n", "error", "std_error"] {
        return Err(format_err(&csv_path, format!("unexpected header {headers:?}")));
    }
    let points = reader
        .deserialize::<RatePoint>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| format_err(&csv_path, e.to_string()))?;

    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| format_err(&json_path, e.to_string()))?;
    let fit = match (
        summary.slope,
        summary.intercept,
        summary.slope_std_error,
        summary.slope_mc_std_error,
        summary.residual_max,
    ) {
        (Some(slope), Some(intercept), Some(slope_std_error), Some(slope_mc_std_error), Some(residual_max)) => {
            Some(LineFit {
                slope,
                intercept,
                slope_std_error,
                slope_mc_std_error,
                residual_max,
            })
        }
        (None, None, None, None, None) => None,
        _ => return Err(format_err(&json_path, "incomplete fit fields".into())),
    };
    Ok(RateEstimate { points, fit })
}

/// Static log-log plot of the errors and the fitted line.
fn render_svg(run: &ConvergenceRun) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let pts: Vec<(f64, f64)> = run
        .estimate
        .points
        .iter()
        .filter(|p| p.error > 0.0)
        .map(|p| ((p.n as f64).log10(), p.error.log10()))
        .collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let title = match run.estimate.slope() {
        Some(s) => format!("{} grid, slope {:.3}", run.kind, s),
        None => format!("{} grid, exact", run.kind),
    };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{M} {M} V{} H{}" fill="none" stroke="black"/>"#,
        H - M,
        W - M
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">log10 n</text>"#,
        W / 2.0,
        H - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 20 {})">log10 error</text>"#,
        H / 2.0,
        H / 2.0
    );

    if !pts.is_empty() {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let pad = |lo: f64, hi: f64| {
            let span = (hi - lo).max(1e-3);
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
        let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
        for &(x, y) in &pts {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, sx(x), sy(y));
        }
        if let Some(f) = run.estimate.fit {
            let line = |x: f64| (f.intercept + f.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10;
            let (xa, xb) = (pts[0].0, pts[pts.len() - 1].0);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
                sx(xa),
                sy(line(xa)),
                sx(xb),
                sy(line(xb))
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{fit_points, run_strong_convergence};

    fn sample_run() -> (ConvergenceRun, ExperimentConfig) {
        let points = vec![
            RatePoint { n: 8, error: 0.1234567890123, std_error: 0.001 },
            RatePoint { n: 16, error: 0.0712, std_error: 7e-4 },
            RatePoint { n: 32, error: 0.0398, std_error: 5.5e-4 },
        ];
        let run = ConvergenceRun {
            kind: GridKind::Quadratic,
            reference: Reference::FineEm { steps: 128 },
            estimate: fit_points(points).unwrap(),
        };
        let cfg = ExperimentConfig::new("holder:0.75:1".parse().unwrap(), vec![8, 16, 32]);
        (run, cfg)
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (run, cfg) = sample_run();
        let files = persist_results(&run, &cfg, dir.path()).unwrap();
        let back = load_results(dir.path(), GridKind::Quadratic).unwrap();
        assert_eq!(back, run.estimate);
        let csv = fs::read_to_string(&files.csv).unwrap();
        assert!(csv.starts_with("n,error,std_error\n8,0.1234567890123,0.001\n"));
        assert!(fs::read_to_string(&files.svg).unwrap().contains("slope"));
        assert!(fs::read_to_string(&files.dat).unwrap().starts_with("# n error"));
    }

    #[test]
    fn summary_echoes_config() {
        let dir = tempfile::tempdir().unwrap();
        let (run, cfg) = sample_run();
        let files = persist_results(&run, &cfg, dir.path()).unwrap();
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(files.json).unwrap()).unwrap();
        let mut keys: Vec<&str> = value["config"].as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            ["T", "drift", "error_norm", "grid", "master_seed", "n_list", "refinement_factor", "replications", "xi"]
        );
        assert_eq!(value["version"], VERSION);
        assert!(value["slope"].is_number());
    }

    #[test]
    fn exact_runs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new("constant:1".parse().unwrap(), vec![4, 8, 16]);
        cfg.replications = 4;
        let run = run_strong_convergence(&cfg, GridKind::Equidistant).unwrap();
        persist_results(&run, &cfg, dir.path()).unwrap();
        assert_eq!(load_results(dir.path(), GridKind::Equidistant).unwrap(), run.estimate);
    }

    #[test]
    fn unwritable_destination_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let (run, cfg) = sample_run();
        match persist_results(&run, &cfg, &blocker.join("sub")) {
            Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
