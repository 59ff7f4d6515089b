//! Euler-Maruyama scheme for `dX = mu(X) dt + dW`.

use std::io::Write;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::path::BrownianPath;

/// Scheme values at the grid nodes together with the Brownian path that
/// drove them, so that the continuous-time interpolation can be evaluated.
#[derive(Debug, Clone)]
pub struct EMPath {
    grid: Grid,
    x_values: Vec<f64>,
    w_values: Vec<f64>,
    drift: DriftSpec,
    xi: f64,
}

impl EMPath {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x_values
    }

    pub fn w_values(&self) -> &[f64] {
        &self.w_values
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    pub fn terminal(&self) -> f64 {
        *self.x_values.last().unwrap_or(&self.xi)
    }

    /// Continuous-time scheme
    /// `x(t) = x(t̲) + mu(x(t̲)) (t - t̲) + (W_t - W(t̲))`, where `w_t` is the
    /// Brownian value at `t` on the same coupled path.
    pub fn eval_continuous(&self, t: f64, w_t: f64) -> Result<f64> {
        let horizon = self.grid.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::invalid("t", format!("{t} outside [0, {horizon}]")));
        }
        let k = self.grid.left_index(t);
        let t_left = self.grid.times()[k];
        if t == t_left {
            return Ok(self.x_values[k]);
        }
        let x = self.x_values[k];
        Ok(x + self.drift.mu(x) * (t - t_left) + (w_t - self.w_values[k]))
    }

    /// CSV with header `t,x`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x")?;
        for (t, x) in self.grid.times().iter().zip(&self.x_values) {
            writeln!(out, "{t},{x}")?;
        }
        Ok(())
    }
}

/// `x_{k+1} = x_k + mu(x_k) (t_{k+1} - t_k) + (W(t_{k+1}) - W(t_k))`,
/// `x_0 = xi`, on the grid of `path`.
pub fn em_solve(drift: &DriftSpec, xi: f64, path: &BrownianPath) -> Result<EMPath> {
    let x_values = em_values(drift, xi, path.grid().times(), path.values())?;
    Ok(EMPath {
        grid: path.grid().clone(),
        x_values,
        w_values: path.values().to_vec(),
        drift: drift.clone(),
        xi,
    })
}

/// EM node values for Brownian values `w` at `times`.
pub(crate) fn em_values(drift: &DriftSpec, xi: f64, times: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let mut x_values = Vec::with_capacity(times.len());
    let mut x = xi;
    x_values.push(x);
    for k in 0..times.len() - 1 {
        let m = drift.mu(x);
        if !m.is_finite() {
            return Err(Error::NonFiniteDrift { step: k, state: x });
        }
        x += m * (times[k + 1] - times[k]) + (w[k + 1] - w[k]);
        x_values.push(x);
    }
    Ok(x_values)
}

/// `em_eval_continuous` in free-function form.
pub fn em_eval_continuous(em: &EMPath, t: f64, w_t: f64) -> Result<f64> {
    em.eval_continuous(t, w_t)
}

/// Pathwise exact solution `X(t_k) = xi + c t_k + W(t_k)` for constant
/// drift `c`; `None` for every other drift.
pub fn exact_solution_oracle(drift: &DriftSpec, xi: f64, path: &BrownianPath) -> Option<EMPath> {
    let c = drift.constant_value()?;
    let x_values = path
        .grid()
        .times()
        .iter()
        .zip(path.values())
        .map(|(t, w)| xi + c * t + w)
        .collect();
    Some(EMPath {
        grid: path.grid().clone(),
        x_values,
        w_values: path.values().to_vec(),
        drift: drift.clone(),
        xi,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::drift::{make_step_drift, IrregularDrift, SmoothDrift};
    use crate::path::{sample_brownian, RngStream};

    fn one_step_path(w1: f64) -> BrownianPath {
        BrownianPath::from_values(Grid::equidistant(1, 1.0).unwrap(), vec![0.0, w1]).unwrap()
    }

    #[test]
    fn zero_drift_follows_the_path() {
        let grid = Grid::quadratic(16, 2.0).unwrap();
        let path = sample_brownian(&grid, RngStream::new(3, 0));
        let em = em_solve(&DriftSpec::zero(), 0.25, &path).unwrap();
        for (x, w) in em.x_values().iter().zip(path.values()) {
            assert!((x - (0.25 + w)).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_drift_is_exact() {
        let grid = Grid::equidistant(64, 1.0).unwrap();
        let path = sample_brownian(&grid, RngStream::new(3, 1));
        let drift = DriftSpec::constant(1.0);
        let em = em_solve(&drift, 0.5, &path).unwrap();
        let exact = exact_solution_oracle(&drift, 0.5, &path).unwrap();
        for (a, b) in em.x_values().iter().zip(exact.x_values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_step_with_sign_drift() {
        let sign = make_step_drift(&[(1.0, 0.0)], 2.0).unwrap();
        let em = em_solve(&sign, 0.0, &one_step_path(0.3)).unwrap();
        assert_eq!(em.x_values(), &[0.0, 0.3]);
        assert_eq!(em.eval_continuous(0.5, 0.1).unwrap(), 0.1);
        assert_eq!(em.eval_continuous(1.0, 0.3).unwrap(), 0.3);
        assert!(em.eval_continuous(1.5, 0.0).is_err());
        assert!(em.eval_continuous(-0.1, 0.0).is_err());
    }

    #[test]
    fn continuous_evaluation_at_nodes_is_bitwise() {
        let grid = Grid::quadratic(9, 1.0).unwrap();
        let path = sample_brownian(&grid, RngStream::new(8, 2));
        let sign = make_step_drift(&[(1.0, 0.0)], 2.0).unwrap();
        let em = em_solve(&sign, 0.5, &path).unwrap();
        for (k, (&t, &w)) in grid.times().iter().zip(path.values()).enumerate() {
            assert_eq!(em.eval_continuous(t, w).unwrap(), em.x_values()[k]);
        }
        let zero = em_solve(&DriftSpec::zero(), 0.5, &path).unwrap();
        assert!((zero.eval_continuous(0.3, 0.77).unwrap() - 1.27).abs() < 1e-15);
    }

    #[test]
    fn oracle_examples() {
        let path = one_step_path(-0.5);
        let exact = exact_solution_oracle(&DriftSpec::constant(2.0), 1.0, &path).unwrap();
        assert_eq!(exact.terminal(), 2.5);
        let zero = exact_solution_oracle(&DriftSpec::zero(), 0.0, &path).unwrap();
        assert_eq!(zero.x_values(), &[0.0, -0.5]);
        let sign = make_step_drift(&[(1.0, 0.0)], 2.0).unwrap();
        assert!(exact_solution_oracle(&sign, 0.0, &path).is_none());
    }

    #[test]
    fn non_finite_drift_is_reported() {
        let bad = DriftSpec::new(
            SmoothDrift::new(
                Arc::new(|x: f64| if x > 0.2 { f64::NAN } else { 1.0 }),
                Arc::new(|_| 0.0),
                Arc::new(|_| 0.0),
                1.0,
                0.0,
                0.0,
            ),
            IrregularDrift::zero(),
            "broken",
        );
        let grid = Grid::equidistant(4, 1.0).unwrap();
        let path = BrownianPath::from_values(grid, vec![0.0; 5]).unwrap();
        assert!(matches!(
            em_solve(&bad, 0.0, &path),
            Err(Error::NonFiniteDrift { step: 1, .. })
        ));
    }

    #[test]
    fn csv_export() {
        let em = em_solve(&DriftSpec::zero(), 1.0, &one_step_path(0.5)).unwrap();
        let mut buf = Vec::new();
        em.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x\n0,1\n1,1.5\n");
    }
}
