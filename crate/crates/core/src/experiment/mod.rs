//! Coupled strong-convergence studies of the EM scheme.
//!
//! Each replication samples one Brownian path on a reference grid that is
//! an `m`-fold refinement of the finest study grid, solves EM there (or uses
//! the exact solution for constant drift), restricts the same path to every
//! study grid and records the squared gaps at the study nodes. The reported
//! error for a grid is
//!
//! ```text
//! max_k ( E |X_{t_k} - x_{t_k}|² )^{1/2}
//! ```
//!
//! or its terminal-node version.

mod fit;
mod persist;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{DriftId, DriftSpec};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridKind};
use crate::numeric::mean_and_std_error;
use crate::path::{sample_brownian, InitialValue, RngStream};
use crate::scheme::em_values;

pub use fit::{fit_points, fit_rate, LineFit, RateEstimate, RatePoint};
pub use persist::{load_results, persist_comparison, persist_results, PersistedFiles};

/// Errors at or below this level are treated as exact zeros.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Which grid families a study runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridChoice {
    #[default]
    #[serde(alias = "equi")]
    Equidistant,
    #[serde(alias = "quad")]
    Quadratic,
    Both,
}

impl GridChoice {
    pub fn kinds(self) -> Vec<GridKind> {
        match self {
            GridChoice::Equidistant => vec![GridKind::Equidistant],
            GridChoice::Quadratic => vec![GridKind::Quadratic],
            GridChoice::Both => vec![GridKind::Equidistant, GridKind::Quadratic],
        }
    }
}

impl FromStr for GridChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "equi" | "equidistant" => Ok(GridChoice::Equidistant),
            "quad" | "quadratic" => Ok(GridChoice::Quadratic),
            "both" => Ok(GridChoice::Both),
            other => Err(Error::parse("grid choice", other, "expected equi, quad or both")),
        }
    }
}

impl fmt::Display for GridChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridChoice::Equidistant => "equidistant",
            GridChoice::Quadratic => "quadratic",
            GridChoice::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    /// `max_k (E|X_{t_k} - x_{t_k}|²)^{1/2}` over all grid nodes.
    #[default]
    MaxOverNodes,
    /// `(E|X_T - x_T|²)^{1/2}`.
    Terminal,
}

impl FromStr for ErrorNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "max" | "max_over_nodes" => Ok(ErrorNorm::MaxOverNodes),
            "terminal" => Ok(ErrorNorm::Terminal),
            other => Err(Error::parse("error norm", other, "expected max_over_nodes or terminal")),
        }
    }
}

fn default_horizon() -> f64 {
    1.0
}

fn default_refinement() -> usize {
    4
}

fn default_replications() -> usize {
    1000
}

/// A strong-convergence study. The JSON form uses the same field names,
/// with the horizon under `"T"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub drift: DriftId,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    /// Defaults to 0.5 for step drifts (off the jump at 0) and 0 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<InitialValue>,
    #[serde(default)]
    pub grid: GridChoice,
    pub n_list: Vec<usize>,
    #[serde(default = "default_refinement")]
    pub refinement_factor: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub error_norm: ErrorNorm,
}

impl ExperimentConfig {
    pub fn new(drift: DriftId, n_list: Vec<usize>) -> Self {
        Self {
            drift,
            horizon: default_horizon(),
            xi: None,
            grid: GridChoice::default(),
            n_list,
            refinement_factor: default_refinement(),
            replications: default_replications(),
            master_seed: 0,
            error_norm: ErrorNorm::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }

    /// The initial value actually used.
    pub fn initial_value(&self) -> InitialValue {
        self.xi.unwrap_or(match self.drift {
            DriftId::Sign { .. } | DriftId::Step { .. } => InitialValue::Deterministic(0.5),
            _ => InitialValue::Deterministic(0.0),
        })
    }

    /// Checks the config and fills in defaulted fields.
    pub fn resolved(&self) -> Result<Self> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("T", format!("must be positive, got {}", self.horizon)));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::invalid("n_list", "need positive step counts"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n_list", "must be strictly increasing"));
        }
        if self.refinement_factor < 2 {
            return Err(Error::invalid("refinement_factor", "must be at least 2"));
        }
        if self.replications < 2 {
            return Err(Error::invalid("replications", "need at least 2"));
        }
        let xi = self.initial_value();
        xi.to_string().parse::<InitialValue>()?;
        self.drift.build()?;
        Ok(Self {
            xi: Some(xi),
            ..self.clone()
        })
    }
}

/// What the study grids were compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    ExactOracle,
    FineEm { steps: usize },
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::ExactOracle => f.write_str("exact solution"),
            Reference::FineEm { steps } => write!(f, "EM with {steps} steps"),
        }
    }
}

/// Whether to use the exact solution when one is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceChoice {
    #[default]
    Auto,
    FineEm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRun {
    pub kind: GridKind,
    pub reference: Reference,
    pub estimate: RateEstimate,
}

/// Runs one study on grids of `kind`.
pub fn run_strong_convergence(cfg: &ExperimentConfig, kind: GridKind) -> Result<ConvergenceRun> {
    run_strong_convergence_with(cfg, kind, ReferenceChoice::Auto)
}

pub fn run_strong_convergence_with(
    cfg: &ExperimentConfig,
    kind: GridKind,
    choice: ReferenceChoice,
) -> Result<ConvergenceRun> {
    let cfg = cfg.resolved()?;
    let drift = cfg.drift.build()?;
    let xi = cfg.initial_value();
    let max_n = *cfg.n_list.last().unwrap_or(&1);
    let ref_steps = cfg
        .refinement_factor
        .checked_mul(max_n)
        .ok_or_else(|| Error::invalid("refinement_factor", "reference grid too large"))?;
    let ref_grid = kind.build(ref_steps, cfg.horizon)?;
    let study: Vec<(Grid, Vec<usize>)> = cfg
        .n_list
        .iter()
        .map(|&n| {
            let grid = kind.build(n, cfg.horizon)?;
            let embedding = grid.embedding(&ref_grid)?;
            Ok((grid, embedding))
        })
        .collect::<Result<_>>()?;
    let reference = match (choice, drift.constant_value()) {
        (ReferenceChoice::Auto, Some(_)) => Reference::ExactOracle,
        _ => Reference::FineEm { steps: ref_steps },
    };

    let columns: usize = study
        .iter()
        .map(|(g, _)| match cfg.error_norm {
            ErrorNorm::MaxOverNodes => g.times().len(),
            ErrorNorm::Terminal => 1,
        })
        .sum();
    let rows = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            replication_gaps(&drift, xi, &ref_grid, &study, reference, cfg.error_norm, cfg.master_seed, r)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let mut column = vec![0.0; rows.len()];
    let mut offset = 0;
    let mut points = Vec::with_capacity(study.len());
    for (grid, _) in &study {
        let width = match cfg.error_norm {
            ErrorNorm::MaxOverNodes => grid.times().len(),
            ErrorNorm::Terminal => 1,
        };
        let mut worst = (0.0, 0.0);
        for c in offset..offset + width {
            for (slot, row) in column.iter_mut().zip(&rows) {
                *slot = row[c];
            }
            let (mean, se) = mean_and_std_error(&column);
            if mean > worst.0 {
                worst = (mean, se);
            }
        }
        offset += width;
        let (mean, se) = worst;
        let error = mean.sqrt();
        let std_error = if mean > 0.0 { se / (2.0 * error) } else { 0.0 };
        points.push(RatePoint {
            n: grid.n(),
            error,
            std_error,
        });
    }
    debug_assert_eq!(offset, columns);

    let estimate = if points.iter().all(|p| p.error <= EXACT_TOLERANCE) {
        RateEstimate::exact(points)
    } else {
        fit_points(points)?
    };
    Ok(ConvergenceRun {
        kind,
        reference,
        estimate,
    })
}

#[allow(clippy::too_many_arguments)]
fn replication_gaps(
    drift: &DriftSpec,
    xi: InitialValue,
    ref_grid: &Grid,
    study: &[(Grid, Vec<usize>)],
    reference: Reference,
    norm: ErrorNorm,
    seed: u64,
    replication: u64,
) -> Result<Vec<f64>> {
    let stream = RngStream::new(seed, replication);
    let x0 = xi.sample(stream);
    let path = sample_brownian(ref_grid, stream);
    let w = path.values();
    let times = ref_grid.times();
    let exact: Vec<f64> = match reference {
        Reference::ExactOracle => {
            let c = drift.constant_value().unwrap_or(0.0);
            times.iter().zip(w).map(|(t, w)| x0 + c * t + w).collect()
        }
        Reference::FineEm { .. } => em_values(drift, x0, times, w)?,
    };
    let mut gaps = Vec::new();
    for (grid, embedding) in study {
        let w_n: Vec<f64> = embedding.iter().map(|&j| w[j]).collect();
        let x_n = em_values(drift, x0, grid.times(), &w_n)?;
        let gap = |k: usize| (exact[embedding[k]] - x_n[k]).powi(2);
        match norm {
            ErrorNorm::MaxOverNodes => gaps.extend((0..x_n.len()).map(gap)),
            ErrorNorm::Terminal => gaps.push(gap(x_n.len() - 1)),
        }
    }
    Ok(gaps)
}

/// Equidistant and quadratic runs on shared seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridComparison {
    pub equidistant: ConvergenceRun,
    pub quadratic: ConvergenceRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonOutcome {
    /// Both schemes are exact.
    Tie,
    QuadraticSteeper,
    EquidistantSteeper,
}

impl GridComparison {
    pub fn outcome(&self) -> ComparisonOutcome {
        match (self.equidistant.estimate.slope(), self.quadratic.estimate.slope()) {
            (None, None) => ComparisonOutcome::Tie,
            (Some(_), None) => ComparisonOutcome::QuadraticSteeper,
            (None, Some(_)) => ComparisonOutcome::EquidistantSteeper,
            (Some(e), Some(q)) if q < e => ComparisonOutcome::QuadraticSteeper,
            (Some(e), Some(q)) if e < q => ComparisonOutcome::EquidistantSteeper,
            _ => ComparisonOutcome::Tie,
        }
    }

    /// CSV with header `n,error_equi,std_error_equi,error_quad,std_error_quad`.
    pub fn write_table<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,error_equi,std_error_equi,error_quad,std_error_quad")?;
        for (e, q) in self
            .equidistant
            .estimate
            .points
            .iter()
            .zip(&self.quadratic.estimate.points)
        {
            writeln!(out, "{},{},{},{},{}", e.n, e.error, e.std_error, q.error, q.std_error)?;
        }
        Ok(())
    }
}

/// Runs the study on both grid kinds with the same seeds.
pub fn compare_grids(cfg: &ExperimentConfig) -> Result<GridComparison> {
    Ok(GridComparison {
        equidistant: run_strong_convergence(cfg, GridKind::Equidistant)?,
        quadratic: run_strong_convergence(cfg, GridKind::Quadratic)?,
    })
}
