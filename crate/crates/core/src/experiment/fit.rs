use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured error at one grid size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub error: f64,
    pub std_error: f64,
}

/// Least-squares line `log error = intercept + slope log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// From the regression residuals.
    pub slope_std_error: f64,
    /// Monte Carlo standard errors of the points, propagated through the
    /// regression by the delta method.
    pub slope_mc_std_error: f64,
    /// Largest absolute residual in log space.
    pub residual_max: f64,
}

/// Errors over a range of grid sizes with the fitted rate. `fit` is `None`
/// when every error vanished, i.e. the scheme is exact and the slope is
/// undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub points: Vec<RatePoint>,
    pub fit: Option<LineFit>,
}

impl RateEstimate {
    pub fn exact(points: Vec<RatePoint>) -> Self {
        Self { points, fit: None }
    }

    pub fn is_exact(&self) -> bool {
        self.fit.is_none()
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// OLS fit of `(log n, log error)` for pairs without standard errors.
pub fn fit_rate(pairs: &[(usize, f64)]) -> Result<RateEstimate> {
    fit_points(
        pairs
            .iter()
            .map(|&(n, error)| RatePoint {
                n,
                error,
                std_error: 0.0,
            })
            .collect(),
    )
}

/// OLS fit of `(log n, log error)`.
pub fn fit_points(points: Vec<RatePoint>) -> Result<RateEstimate> {
    if points.len() < 3 {
        return Err(Error::DegenerateDesign(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    for (index, p) in points.iter().enumerate() {
        if !(p.error > 0.0 && p.error.is_finite()) {
            return Err(Error::NonPositiveError {
                index,
                value: p.error,
            });
        }
        if p.n == 0 {
            return Err(Error::invalid("n", "grid sizes must be positive"));
        }
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign("all grid sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_std_error = if points.len() > 2 {
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let residual_max = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    // Var(log e_i) ≈ (se_i / e_i)².
    let slope_mc_std_error = xs
        .iter()
        .zip(&points)
        .map(|(x, p)| ((x - x_mean) / sxx * p.std_error / p.error).powi(2))
        .sum::<f64>()
        .sqrt();

    Ok(RateEstimate {
        points,
        fit: Some(LineFit {
            slope,
            intercept,
            slope_std_error,
            slope_mc_std_error,
            residual_max,
        }),
    })
}
