use crate::drift::RealFn;
use crate::error::{Error, Result};
use crate::numeric::{adaptive_gauss_kronrod, monotone_root};

/// Number of knot intervals of the `lambda` table.
const TABLE_INTERVALS: usize = 1024;
/// Sample points used to check ellipticity and `sigma'`.
const CHECK_SAMPLES: usize = 4097;

/// Reduction of `dX = mu(X) dt + sigma(X) dW` to additive noise through
/// `lambda(x) = ∫_{x0}^x dz / sigma(z)`: `Y = lambda(X)` solves
/// `dY = g(Y) dt + dW` with
///
/// ```text
/// g(y) = mu(lambda^-1(y)) / sigma(lambda^-1(y)) - sigma'(lambda^-1(y)) / 2.
/// ```
#[derive(Clone)]
pub struct LampertiReduction {
    mu: RealFn,
    sigma: RealFn,
    sigma_prime: RealFn,
    x0: f64,
    window: (f64, f64),
    sigma_min: f64,
    sigma_max: f64,
    knots: Vec<f64>,
    lambda_knots: Vec<f64>,
}

impl std::fmt::Debug for LampertiReduction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LampertiReduction")
            .field("x0", &self.x0)
            .field("window", &self.window)
            .field("sigma_min", &self.sigma_min)
            .field("sigma_max", &self.sigma_max)
            .finish_non_exhaustive()
    }
}

pub fn lamperti_reduce(
    mu: RealFn,
    sigma: RealFn,
    sigma_prime: RealFn,
    x0: f64,
    window: (f64, f64),
) -> Result<LampertiReduction> {
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("window", format!("need finite lo < hi, got ({lo}, {hi})")));
    }
    if !(lo <= x0 && x0 <= hi) {
        return Err(Error::invalid("x0", format!("{x0} lies outside the window")));
    }

    let mut sigma_min = f64::INFINITY;
    let mut sigma_max = 0.0f64;
    let width = hi - lo;
    let fd_step = 1e-5 * (1.0 + width);
    for i in 0..CHECK_SAMPLES {
        let x = lo + width * (i as f64 / (CHECK_SAMPLES - 1) as f64);
        let s = sigma(x);
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::NotElliptic { location: x, value: s });
        }
        sigma_min = sigma_min.min(s);
        sigma_max = sigma_max.max(s);

        let fd = (sigma(x + fd_step) - sigma(x - fd_step)) / (2.0 * fd_step);
        let ds = sigma_prime(x);
        if !ds.is_finite() || (fd - ds).abs() > 1e-4 * (1.0 + s.abs() + ds.abs()) {
            return Err(Error::invalid(
                "sigma_prime",
                format!("sigma'({x}) = {ds} but finite differences give {fd}"),
            ));
        }
    }

    let mut knots: Vec<f64> = (0..=TABLE_INTERVALS)
        .map(|i| lo + width * (i as f64 / TABLE_INTERVALS as f64))
        .collect();
    knots.push(x0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let inv_sigma = |z: f64| 1.0 / sigma(z);
    let mut lambda_knots = Vec::with_capacity(knots.len());
    lambda_knots.push(0.0);
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let tol = 1e-15 * (1.0 + (w[1] - w[0]) / sigma_min);
        acc += adaptive_gauss_kronrod(&inv_sigma, w[0], w[1], tol)?;
        lambda_knots.push(acc);
    }
    let origin = knots.iter().position(|&k| k == x0).unwrap_or(0);
    let offset = lambda_knots[origin];
    for v in &mut lambda_knots {
        *v -= offset;
    }
    lambda_knots[origin] = 0.0;

    Ok(LampertiReduction {
        mu,
        sigma,
        sigma_prime,
        x0,
        window,
        sigma_min,
        sigma_max,
        knots,
        lambda_knots,
    })
}

impl LampertiReduction {
    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Initial value of the reduced equation, `lambda(x0) = 0`.
    pub fn y0(&self) -> f64 {
        0.0
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Sampled `(inf sigma, sup sigma)` over the window.
    pub fn sigma_range(&self) -> (f64, f64) {
        (self.sigma_min, self.sigma_max)
    }

    fn integral_from(&self, from: f64, to: f64) -> f64 {
        let inv_sigma = |z: f64| 1.0 / (self.sigma)(z);
        let tol = 1e-15 * (1.0 + (to - from).abs() / self.sigma_min);
        // `from` is a tabulated knot and sigma was validated around it; the
        // quadrature cannot fail on a bounded positive integrand.
        adaptive_gauss_kronrod(&inv_sigma, from, to, tol).unwrap_or(f64::NAN)
    }

    /// `lambda(x) = ∫_{x0}^x dz / sigma(z)`, from the nearest knot on the left
    /// (or the window edge outside the window).
    pub fn lambda(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return self.lambda_knots[0] + self.integral_from(self.knots[0], x);
        }
        if x >= self.knots[n - 1] {
            return self.lambda_knots[n - 1] + self.integral_from(self.knots[n - 1], x);
        }
        let i = self.knots.partition_point(|&k| k <= x) - 1;
        self.lambda_knots[i] + self.integral_from(self.knots[i], x)
    }

    /// Monotone inverse of `lambda` to `|lambda(x) - y| <= 1e-13 (1 + |y|)`.
    pub fn lambda_inv(&self, y: f64) -> f64 {
        let n = self.knots.len();
        let tol = 1e-13 * (1.0 + y.abs());
        let (lo, hi) = if y < self.lambda_knots[0] {
            let edge = self.knots[0];
            let mut step = (self.lambda_knots[0] - y) * self.sigma_max + 1.0;
            while self.lambda(edge - step) > y {
                step *= 2.0;
            }
            (edge - step, edge)
        } else if y > self.lambda_knots[n - 1] {
            let edge = self.knots[n - 1];
            let mut step = (y - self.lambda_knots[n - 1]) * self.sigma_max + 1.0;
            while self.lambda(edge + step) < y {
                step *= 2.0;
            }
            (edge, edge + step)
        } else {
            let i = self
                .lambda_knots
                .partition_point(|&l| l <= y)
                .clamp(1, n - 1);
            (self.knots[i - 1], self.knots[i])
        };
        monotone_root(
            |x| self.lambda(x),
            |x| 1.0 / (self.sigma)(x),
            y,
            lo,
            hi,
            tol,
        )
    }

    /// Drift of the additive-noise equation.
    pub fn g(&self, y: f64) -> f64 {
        let x = self.lambda_inv(y);
        (self.mu)(x) / (self.sigma)(x) - 0.5 * (self.sigma_prime)(x)
    }

    /// `X_t = lambda^-1(Y_t)`.
    pub fn back_map(&self, y: f64) -> f64 {
        self.lambda_inv(y)
    }
}
