//! Time partitions `0 = t_0 < t_1 < ... < t_n = T`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// `t_k = T k / n`.
    Equidistant,
    /// `t_k = T (k / n)^2`, dense near zero.
    Quadratic,
    Custom,
}

impl GridKind {
    /// Builds a shipped grid of this kind. Custom grids have no `n`-indexed
    /// family and are rejected.
    pub fn build(self, n: usize, horizon: f64) -> Result<Grid> {
        match self {
            GridKind::Equidistant => Grid::equidistant(n, horizon),
            GridKind::Quadratic => Grid::quadratic(n, horizon),
            GridKind::Custom => Err(Error::invalid(
                "grid",
                "custom grids cannot be generated from a step count",
            )),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            GridKind::Equidistant => "equi",
            GridKind::Quadratic => "quad",
            GridKind::Custom => "custom",
        }
    }
}

impl FromStr for GridKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "equi" | "equidistant" => Ok(GridKind::Equidistant),
            "quad" | "quadratic" => Ok(GridKind::Quadratic),
            "custom" => Ok(GridKind::Custom),
            other => Err(Error::parse("grid kind", other, "expected equi or quad")),
        }
    }
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridKind::Equidistant => "equidistant",
            GridKind::Quadratic => "quadratic",
            GridKind::Custom => "custom",
        })
    }
}

/// Largest step count for which `k^2` and `n^2` are exact in `f64`.
const MAX_STEPS: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    times: Vec<f64>,
    horizon: f64,
    kind: GridKind,
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("T", format!("horizon must be positive, got {horizon}")))
    }
}

fn check_steps(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "grid needs at least one step"));
    }
    if n > MAX_STEPS {
        return Err(Error::invalid("n", format!("at most {MAX_STEPS} steps supported")));
    }
    Ok(())
}

impl Grid {
    /// `t_k = T·(k/n)`. Equal ratios `k/n` give bit-identical times, which makes
    /// nesting checks exact.
    pub fn equidistant(n: usize, horizon: f64) -> Result<Self> {
        check_steps(n)?;
        check_horizon(horizon)?;
        let nf = n as f64;
        let times = (0..=n).map(|k| horizon * (k as f64 / nf)).collect();
        Ok(Self {
            times,
            horizon,
            kind: GridKind::Equidistant,
        })
    }

    /// `t_k = T·(k²/n²)`.
    pub fn quadratic(n: usize, horizon: f64) -> Result<Self> {
        check_steps(n)?;
        check_horizon(horizon)?;
        let n2 = (n * n) as f64;
        let times = (0..=n).map(|k| horizon * ((k * k) as f64 / n2)).collect();
        Ok(Self {
            times,
            horizon,
            kind: GridKind::Quadratic,
        })
    }

    /// Any strictly increasing sequence starting at 0; the horizon is the last
    /// time.
    pub fn custom(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::invalid("times", "need at least two times"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("times", format!("first time must be 0, got {}", times[0])));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::invalid("times", format!("non-finite time at index {i}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "times",
                format!("times must increase strictly (index {})", i + 1),
            ));
        }
        let horizon = *times.last().unwrap_or(&0.0);
        Ok(Self {
            times,
            horizon,
            kind: GridKind::Custom,
        })
    }

    /// Newline-separated times; blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut times = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let t: f64 = line.parse().map_err(|_| Error::Format {
                path: path.to_owned(),
                reason: format!("line {}: `{line}` is not a number", line_no + 1),
            })?;
            times.push(t);
        }
        Self::custom(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Number of steps.
    pub fn n(&self) -> usize {
        self.times.len() - 1
    }

    /// `max_k (t_{k+1} - t_k)`. Shipped kinds use their closed forms `T/n`
    /// and `(2n - 1) T / n²`, which the stored times reproduce up to rounding.
    pub fn mesh_norm(&self) -> f64 {
        let n = self.n();
        match self.kind {
            GridKind::Equidistant => self.horizon / n as f64,
            GridKind::Quadratic => (2 * n - 1) as f64 * self.horizon / (n * n) as f64,
            GridKind::Custom => self.max_gap(),
        }
    }

    /// Largest difference of consecutive stored times.
    pub fn max_gap(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Splits every step into `parts` equal sub-steps. The original times are
    /// copied unchanged, so the result nests `self` exactly.
    pub fn subdivide(&self, parts: usize) -> Result<Grid> {
        if parts == 0 {
            return Err(Error::invalid("substeps", "need at least one sub-step"));
        }
        if parts == 1 {
            return Ok(self.clone());
        }
        let pf = parts as f64;
        let mut times = Vec::with_capacity(self.n() * parts + 1);
        for w in self.times.windows(2) {
            let width = w[1] - w[0];
            times.push(w[0]);
            times.extend((1..parts).map(|j| w[0] + width * (j as f64 / pf)));
        }
        times.push(self.horizon);
        Grid::custom(times)
    }

    /// Index of the last grid time `<= t`, i.e. the left endpoint `t̲`.
    pub fn left_index(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s <= t);
        idx.saturating_sub(1).min(self.n())
    }

    /// `Σ_{k=1}^{n-1} t_k^{-p} (t_{k+1} - t_k)` for `p ∈ (0, 1)`.
    pub fn weighted_mesh_sum(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")));
        }
        Ok(self
            .times
            .windows(2)
            .skip(1)
            .map(|w| w[0].powf(-p) * (w[1] - w[0]))
            .sum())
    }

    fn exact_comparison(&self, other: &Grid) -> bool {
        self.kind == other.kind && self.kind != GridKind::Custom
    }

    /// For each time of `self`, its index in `fine`.
    pub fn embedding(&self, fine: &Grid) -> Result<Vec<usize>> {
        if self.horizon != fine.horizon {
            return Err(Error::HorizonMismatch {
                left: self.horizon,
                right: fine.horizon,
            });
        }
        let tol = if self.exact_comparison(fine) {
            0.0
        } else {
            1e-14 * self.horizon
        };
        let fine_times = fine.times();
        let mut indices = Vec::with_capacity(self.times.len());
        let mut j = 0;
        for &t in &self.times {
            while j < fine_times.len() && fine_times[j] < t - tol {
                j += 1;
            }
            if j < fine_times.len() && (fine_times[j] - t).abs() <= tol {
                indices.push(j);
            } else {
                return Err(Error::NotNested { time: t });
            }
        }
        Ok(indices)
    }
}

/// True iff every time of `coarse` appears in `fine`.
pub fn is_nested(coarse: &Grid, fine: &Grid) -> Result<bool> {
    match coarse.embedding(fine) {
        Ok(_) => Ok(true),
        Err(Error::NotNested { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Grid descriptor as written in configs: `equi:n`, `quad:n`,
/// `custom:<path>`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Equidistant(usize),
    Quadratic(usize),
    Custom(PathBuf),
}

impl GridSpec {
    /// The horizon is ignored for custom grids, whose last time is used.
    pub fn build(&self, horizon: f64) -> Result<Grid> {
        match self {
            GridSpec::Equidistant(n) => Grid::equidistant(*n, horizon),
            GridSpec::Quadratic(n) => Grid::quadratic(*n, horizon),
            GridSpec::Custom(path) => Grid::from_file(path),
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::parse("grid spec", s, "expected equi:n, quad:n or custom:path"))?;
        let steps = || -> Result<usize> {
            arg.trim()
                .parse()
                .map_err(|_| Error::parse("grid spec", s, "step count must be a positive integer"))
        };
        match kind.trim() {
            "equi" => Ok(GridSpec::Equidistant(steps()?)),
            "quad" => Ok(GridSpec::Quadratic(steps()?)),
            "custom" => Ok(GridSpec::Custom(PathBuf::from(arg))),
            _ => Err(Error::parse("grid spec", s, "unknown grid kind")),
        }
    }
}
