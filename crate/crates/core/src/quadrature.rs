//! The weighted quadrature problem behind the EM error bound.
//!
//! With the weight `Y_s = phi'(W_s + xi)` and the integrand
//! `Z_s = b(W_s + xi)`, the integral `I = ∫_0^T Y_s Z_s ds` is approximated
//! by freezing `Z` at the left grid point, `I_rule = Σ_k Z_{t_k} ∫ Y_s ds`.
//! The mean-square error of that rule up to time `t`,
//!
//! ```text
//! W_t = E | ∫_0^t phi'(W_s + xi) (b(W_s + xi) - b(W_{s̲} + xi)) ds |²,
//! ```
//!
//! is estimated by Monte Carlo, with the inner time integral resolved by a
//! left-endpoint Riemann sum on `substeps` bridge-refined sub-intervals per
//! grid step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::DriftId;
use crate::error::{Error, Result};
use crate::experiment::{fit_points, RateEstimate, RatePoint};
use crate::grid::{Grid, GridKind};
use crate::numeric::{mean_and_std_error, pairwise_sum};
use crate::path::{sample_brownian, BrownianPath, InitialValue, RngStream};
use crate::transform::{build_zvonkin, ZvonkinTransform, DEFAULT_KNOT_SPACING};

pub const DEFAULT_SUBSTEPS: usize = 32;

/// Estimates at or below this level count as an identically vanishing error.
const EXACT_THRESHOLD: f64 = 1e-24;

/// One quadrature problem: transform (which carries `b`), initial value,
/// grid and sub-resolution.
#[derive(Debug, Clone)]
pub struct QuadratureProblem<'a> {
    transform: &'a ZvonkinTransform,
    xi: f64,
    grid: Grid,
    substeps: usize,
    fine: Grid,
}

impl<'a> QuadratureProblem<'a> {
    pub fn new(transform: &'a ZvonkinTransform, xi: f64, grid: Grid, substeps: usize) -> Result<Self> {
        if substeps < 1 {
            return Err(Error::invalid("substeps", "need at least one sub-step"));
        }
        if !xi.is_finite() {
            return Err(Error::invalid("xi", format!("{xi} is not finite")));
        }
        let fine = grid.subdivide(substeps)?;
        Ok(Self {
            transform,
            xi,
            grid,
            substeps,
            fine,
        })
    }

    pub fn transform(&self) -> &ZvonkinTransform {
        self.transform
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// The grid the Brownian path must be given on.
    pub fn fine_grid(&self) -> &Grid {
        &self.fine
    }

    /// `Y = phi'(w + xi)`.
    #[inline]
    pub fn weight(&self, w: f64) -> f64 {
        self.transform.phi_prime(w + self.xi)
    }

    /// `Z = b(w + xi)`.
    #[inline]
    pub fn integrand(&self, w: f64) -> f64 {
        self.transform.irregular().eval(w + self.xi)
    }

    /// Samples `W` on the grid and refines it by Brownian bridges, so the
    /// coarse values coincide with what an EM run on the same stream sees.
    pub fn sample_path(&self, stream: RngStream) -> Result<BrownianPath> {
        sample_brownian(&self.grid, stream).bridge_refine(&self.fine, stream)
    }

    fn check_path(&self, path: &BrownianPath) -> Result<()> {
        if path.grid().times() != self.fine.times() {
            return Err(Error::invalid(
                "path",
                format!(
                    "expected a path on the grid refined {}-fold ({} times), got {} times",
                    self.substeps,
                    self.fine.times().len(),
                    path.grid().times().len()
                ),
            ));
        }
        Ok(())
    }
}

/// `(I, I_rule)` for one path on the refined grid.
pub fn pathwise_quadrature(problem: &QuadratureProblem<'_>, path: &BrownianPath) -> Result<(f64, f64)> {
    problem.check_path(path)?;
    let times = path.grid().times();
    let w = path.values();
    let mut exact_terms = Vec::with_capacity(times.len() - 1);
    let mut rule_terms = Vec::with_capacity(times.len() - 1);
    let mut frozen = 0.0;
    for j in 0..times.len() - 1 {
        if j % problem.substeps == 0 {
            frozen = problem.integrand(w[j]);
        }
        let ds = times[j + 1] - times[j];
        let y = problem.weight(w[j]) * ds;
        exact_terms.push(y * problem.integrand(w[j]));
        rule_terms.push(y * frozen);
    }
    Ok((pairwise_sum(&exact_terms), pairwise_sum(&rule_terms)))
}

/// `∫_0^t phi'(W_s + xi) (b(W_s + xi) - b(W_{s̲} + xi)) ds` for one path on
/// the refined grid. For `t` between fine nodes the last sub-interval is
/// truncated at `t`.
pub fn pathwise_error(problem: &QuadratureProblem<'_>, path: &BrownianPath, t: f64) -> Result<f64> {
    problem.check_path(path)?;
    let horizon = problem.grid.horizon();
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::invalid("t", format!("{t} outside [0, {horizon}]")));
    }
    Ok(inner_error(problem, path.grid().times(), path.values(), t))
}

fn inner_error(problem: &QuadratureProblem<'_>, times: &[f64], w: &[f64], t: f64) -> f64 {
    let mut terms = Vec::with_capacity(times.len() - 1);
    let mut frozen = 0.0;
    for j in 0..times.len() - 1 {
        if times[j] >= t {
            break;
        }
        if j % problem.substeps == 0 {
            frozen = problem.integrand(w[j]);
        }
        let z = problem.integrand(w[j]);
        if z != frozen {
            let ds = times[j + 1].min(t) - times[j];
            terms.push(problem.weight(w[j]) * (z - frozen) * ds);
        }
    }
    pairwise_sum(&terms)
}

/// Monte Carlo settings shared by the estimator and the rate study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub replications: usize,
    pub substeps: usize,
    pub master_seed: u64,
    /// Index of the first replication; disjoint ranges give independent
    /// estimates under one seed.
    pub first_replication: u64,
}

impl MonteCarlo {
    pub fn new(replications: usize, substeps: usize, master_seed: u64) -> Self {
        Self {
            replications,
            substeps,
            master_seed,
            first_replication: 0,
        }
    }
}

/// Monte Carlo estimate of `W_t` on one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureErrorEstimate {
    pub n: usize,
    pub t: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub replications: usize,
    pub substeps: usize,
}

/// Estimates `W_t` from `mc.replications` independent paths. Replications
/// run in parallel; the reduction is pairwise in replication order.
pub fn estimate_w(
    transform: &ZvonkinTransform,
    xi: &InitialValue,
    grid: &Grid,
    t: f64,
    mc: &MonteCarlo,
) -> Result<QuadratureErrorEstimate> {
    if mc.replications < 2 {
        return Err(Error::invalid("replications", "need at least 2 for a variance estimate"));
    }
    let horizon = grid.horizon();
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::invalid("t", format!("{t} outside [0, {horizon}]")));
    }
    let template = QuadratureProblem::new(transform, 0.0, grid.clone(), mc.substeps)?;
    let start = mc.first_replication;
    let squares = (start..start + mc.replications as u64)
        .into_par_iter()
        .map(|r| {
            let stream = RngStream::new(mc.master_seed, r);
            let problem = QuadratureProblem {
                xi: xi.sample(stream),
                ..template.clone()
            };
            let path = problem.sample_path(stream)?;
            let e = inner_error(&problem, path.grid().times(), path.values(), t);
            Ok(e * e)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (estimate, std_error) = mean_and_std_error(&squares);
    Ok(QuadratureErrorEstimate {
        n: grid.n(),
        t,
        estimate,
        std_error,
        replications: mc.replications,
        substeps: mc.substeps,
    })
}

/// Settings of a decay study of `W_T` over several grid sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureStudyConfig {
    /// The irregular part of this drift is the integrand `b`.
    pub drift: DriftId,
    pub kind: GridKind,
    pub n_list: Vec<usize>,
    pub horizon: f64,
    pub xi: InitialValue,
    pub replications: usize,
    pub substeps: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureStudy {
    pub kind: GridKind,
    pub estimates: Vec<QuadratureErrorEstimate>,
    /// Fit of `log W_T` against `log n`; `fit` is `None` when every estimate
    /// vanishes.
    pub rate: RateEstimate,
}

impl QuadratureStudy {
    /// CSV with header `n,estimate,std_error,substeps,reps`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,estimate,std_error,substeps,reps")?;
        for e in &self.estimates {
            writeln!(out, "{},{},{},{},{}", e.n, e.estimate, e.std_error, e.substeps, e.replications)?;
        }
        Ok(())
    }
}

/// Estimates `W_T` for every `n` (common random numbers across `n`) and
/// regresses `log W_T` on `log n`.
pub fn quadrature_rate_study(cfg: &QuadratureStudyConfig) -> Result<QuadratureStudy> {
    if cfg.n_list.len() < 3 {
        return Err(Error::invalid("n_list", "need at least 3 grid sizes"));
    }
    let spec = cfg.drift.build()?;
    let transform = build_zvonkin(&spec.irregular, DEFAULT_KNOT_SPACING)?;
    let mc = MonteCarlo::new(cfg.replications, cfg.substeps, cfg.master_seed);
    let estimates = cfg
        .n_list
        .iter()
        .map(|&n| {
            let grid = cfg.kind.build(n, cfg.horizon)?;
            estimate_w(&transform, &cfg.xi, &grid, cfg.horizon, &mc)
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<RatePoint> = estimates
        .iter()
        .map(|e| RatePoint {
            n: e.n,
            error: e.estimate,
            std_error: e.std_error,
        })
        .collect();
    let rate = if points.iter().all(|p| p.error <= EXACT_THRESHOLD) {
        RateEstimate::exact(points)
    } else {
        fit_points(points)?
    };
    Ok(QuadratureStudy {
        kind: cfg.kind,
        estimates,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{indicator, IrregularDrift};

    fn transform_of(lo: f64, hi: f64) -> ZvonkinTransform {
        build_zvonkin(&indicator(lo, hi).unwrap().irregular, DEFAULT_KNOT_SPACING).unwrap()
    }

    #[test]
    fn rejects_bad_settings() {
        let tr = transform_of(0.0, 1.0);
        let grid = Grid::equidistant(4, 1.0).unwrap();
        assert!(QuadratureProblem::new(&tr, 0.0, grid.clone(), 0).is_err());
        let xi = InitialValue::Deterministic(0.0);
        assert!(estimate_w(&tr, &xi, &grid, 1.0, &MonteCarlo::new(1, 4, 0)).is_err());
        assert!(estimate_w(&tr, &xi, &grid, 1.5, &MonteCarlo::new(4, 4, 0)).is_err());
        let problem = QuadratureProblem::new(&tr, 0.0, grid.clone(), 4).unwrap();
        let coarse = sample_brownian(&grid, RngStream::new(0, 0));
        assert!(pathwise_quadrature(&problem, &coarse).is_err());
    }

    #[test]
    fn far_support_gives_zero() {
        let tr = transform_of(1e6, 1e6 + 1.0);
        let grid = Grid::equidistant(16, 1.0).unwrap();
        let est = estimate_w(
            &tr,
            &InitialValue::Deterministic(0.0),
            &grid,
            1.0,
            &MonteCarlo::new(200, 8, 3),
        )
        .unwrap();
        assert!(est.estimate <= 1e-20);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn wide_support_freezes_exactly() {
        let tr = transform_of(-1e3, 1e3);
        let grid = Grid::quadratic(8, 1.0).unwrap();
        let problem = QuadratureProblem::new(&tr, 0.0, grid, 16).unwrap();
        for r in 0..5 {
            let path = problem.sample_path(RngStream::new(9, r)).unwrap();
            let (i, i_rule) = pathwise_quadrature(&problem, &path).unwrap();
            assert_eq!(i, i_rule);
            assert!(i > 0.0);
        }
    }

    #[test]
    fn frozen_path_matches_fine_oracle() {
        let grid = Grid::equidistant(4, 1.0).unwrap();
        let substeps = 64;
        let tr = transform_of(0.0, 1.0);
        let problem = QuadratureProblem::new(&tr, 0.0, grid, substeps).unwrap();
        let path_fn = |s: f64| 1.2 * (3.0 * s).sin() - 0.1 * s;
        let fine = problem.fine_grid().clone();
        let values: Vec<f64> = fine.times().iter().map(|&s| path_fn(s)).collect();
        let path = BrownianPath::from_values(fine.clone(), values.clone()).unwrap();
        let (i, i_rule) = pathwise_quadrature(&problem, &path).unwrap();

        // Oracle: the linear interpolant of the same array, integrated at
        // 100 points per sub-interval with phi' = exp(-2 clamp(w, 0, 1)).
        let times = fine.times();
        let weight = |w: f64| (-2.0 * w.clamp(0.0, 1.0)).exp();
        let ind = |w: f64| if w > 0.0 && w < 1.0 { 1.0 } else { 0.0 };
        let mut oracle = 0.0;
        let mut oracle_rule = 0.0;
        for j in 0..times.len() - 1 {
            let k = j / substeps * substeps;
            let ds = (times[j + 1] - times[j]) / 100.0;
            for q in 0..100 {
                let lam = (q as f64 + 0.5) / 100.0;
                let w = values[j] + lam * (values[j + 1] - values[j]);
                oracle += weight(w) * ind(w) * ds;
                oracle_rule += weight(w) * ind(values[k]) * ds;
            }
        }
        let h = 1.0 / (4.0 * substeps as f64);
        assert!((i - oracle).abs() <= 5.0 * h, "{i} vs {oracle}");
        assert!((i_rule - oracle_rule).abs() <= 5.0 * h, "{i_rule} vs {oracle_rule}");

        let e = pathwise_error(&problem, &path, 1.0).unwrap();
        assert!((e - (i - i_rule)).abs() < 1e-14);
        assert_eq!(pathwise_error(&problem, &path, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn partial_interval_truncation() {
        let grid = Grid::equidistant(2, 1.0).unwrap();
        let tr = transform_of(0.0, 1.0);
        let problem = QuadratureProblem::new(&tr, 0.0, grid, 2).unwrap();
        // Fine times 0, .25, .5, .75, 1. Frozen b is 0 at both coarse nodes
        // (W = 0 and 1.5) while b = 1 at s = .25 and .75.
        let values = vec![0.0, 0.5, 1.5, 0.5, 0.5];
        let path = BrownianPath::from_values(problem.fine_grid().clone(), values).unwrap();
        let y = (-2.0f64 * 0.5).exp();
        let full = pathwise_error(&problem, &path, 1.0).unwrap();
        assert!((full - 0.5 * y).abs() < 1e-9);
        let part = pathwise_error(&problem, &path, 0.4).unwrap();
        assert!((part - 0.15 * y).abs() < 1e-9);
    }

    #[test]
    fn xi_shift_is_a_change_of_variables() {
        let grid = Grid::equidistant(8, 1.0).unwrap();
        let base = transform_of(0.0, 1.0);
        let shifted = transform_of(0.75, 1.75);
        let p0 = QuadratureProblem::new(&base, 0.0, grid.clone(), 8).unwrap();
        let p1 = QuadratureProblem::new(&shifted, 0.75, grid, 8).unwrap();
        for r in 0..10 {
            let path = p0.sample_path(RngStream::new(4, r)).unwrap();
            let (i0, r0) = pathwise_quadrature(&p0, &path).unwrap();
            let (i1, r1) = pathwise_quadrature(&p1, &path).unwrap();
            assert!((i0 - i1).abs() < 1e-12 && (r0 - r1).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_stay_in_derivative_bounds() {
        let tr = transform_of(-0.5, 1.0);
        let (lo, hi) = tr.derivative_bounds();
        let problem = QuadratureProblem::new(&tr, 0.2, Grid::quadratic(16, 2.0).unwrap(), 8).unwrap();
        for r in 0..20 {
            let path = problem.sample_path(RngStream::new(2, r)).unwrap();
            for &w in path.values() {
                let y = problem.weight(w);
                assert!(lo <= y && y <= hi);
            }
        }
    }

    #[test]
    fn sub_step_refinement_converges() {
        let tr = transform_of(0.0, 1.0);
        let grid = Grid::equidistant(4, 1.0).unwrap();
        let finest = QuadratureProblem::new(&tr, 0.0, grid.clone(), 32).unwrap();
        let mut diffs = [0.0; 3];
        let reps = 400;
        for r in 0..reps {
            let path = finest.sample_path(RngStream::new(5, r)).unwrap();
            let values: Vec<f64> = [4, 8, 16, 32]
                .iter()
                .map(|&s| {
                    let p = QuadratureProblem::new(&tr, 0.0, grid.clone(), s).unwrap();
                    let restricted = path.restrict(p.fine_grid()).unwrap();
                    pathwise_error(&p, &restricted, 1.0).unwrap().powi(2)
                })
                .collect();
            for i in 0..3 {
                diffs[i] += (values[i + 1] - values[i]).abs() / reps as f64;
            }
        }
        assert!(diffs[0] / diffs[1] >= 1.5 && diffs[1] / diffs[2] >= 1.5, "{diffs:?}");
    }

    #[test]
    fn estimate_is_deterministic_and_consistent() {
        let tr = transform_of(0.0, 1.0);
        let grid = Grid::equidistant(8, 1.0).unwrap();
        let xi = InitialValue::Deterministic(0.0);
        let mc = MonteCarlo::new(2000, 8, 11);
        let a = estimate_w(&tr, &xi, &grid, 1.0, &mc).unwrap();
        let b = estimate_w(&tr, &xi, &grid, 1.0, &mc).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate > 0.0 && a.std_error > 0.0);

        let second = MonteCarlo {
            first_replication: 2000,
            ..mc
        };
        let c = estimate_w(&tr, &xi, &grid, 1.0, &second).unwrap();
        let combined = (a.estimate + c.estimate) / 2.0;
        let se = (a.std_error.powi(2) + c.std_error.powi(2)).sqrt();
        assert!((combined - a.estimate).abs() <= 3.0 * se);
    }

    #[test]
    fn zero_integrand_study_is_exact() {
        let cfg = QuadratureStudyConfig {
            drift: "constant:1".parse().unwrap(),
            kind: GridKind::Equidistant,
            n_list: vec![4, 8, 16],
            horizon: 1.0,
            xi: InitialValue::Deterministic(0.0),
            replications: 10,
            substeps: 4,
            master_seed: 1,
        };
        let study = quadrature_rate_study(&cfg).unwrap();
        assert!(study.rate.fit.is_none());
        assert!(IrregularDrift::zero().is_zero());
    }
}
