use std::io::Write;

use crate::drift::{IrregularDrift, Support};
use crate::error::{Error, Result};
use crate::numeric::{adaptive_gauss_kronrod, monotone_root};

/// Knot spacing used when none is given.
pub const DEFAULT_KNOT_SPACING: f64 = 1e-3;
/// The knot table extends this far beyond the support of `b`.
pub const TABLE_MARGIN: f64 = 5.0;

/// State-space transform
///
/// ```text
/// phi(x) = ∫_0^x exp(-2 B(y)) dy,   B(y) = ∫_0^y b(z) dz,
/// ```
///
/// which solves `b phi' + phi''/2 = 0` almost everywhere and maps the drift
/// `b` away. `B` is tabulated on a knot table and interpolated linearly;
/// `phi' = exp(-2 B)` then stays positive exactly, and `phi` is integrated
/// in closed form on each knot interval, so `phi' ` is the exact derivative
/// of the evaluated `phi`.
#[derive(Debug, Clone)]
pub struct ZvonkinTransform {
    b: IrregularDrift,
    knots: Vec<f64>,
    antiderivative: Vec<f64>,
    phi_knots: Vec<f64>,
    l1_bound: f64,
    knot_spacing: f64,
}

/// `expm1(z) / z`, continuous at 0.
#[inline]
fn expm1_ratio(z: f64) -> f64 {
    if z.abs() < 1e-300 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `∫_0^d exp(-2 (start + slope t)) dt`.
#[inline]
fn segment_integral(start: f64, slope: f64, d: f64) -> f64 {
    (-2.0 * start).exp() * d * expm1_ratio(-2.0 * slope * d)
}

/// Builds the transform of `b` with knots roughly `knot_spacing` apart.
pub fn build_zvonkin(b: &IrregularDrift, knot_spacing: f64) -> Result<ZvonkinTransform> {
    ZvonkinTransform::new(b, knot_spacing)
}

impl ZvonkinTransform {
    pub fn new(b: &IrregularDrift, knot_spacing: f64) -> Result<Self> {
        if !(knot_spacing > 0.0 && knot_spacing.is_finite()) {
            return Err(Error::invalid(
                "knot_spacing",
                format!("must be positive, got {knot_spacing}"),
            ));
        }
        if !b.l1_norm.is_finite() {
            return Err(Error::invalid("b", "L1 norm must be finite"));
        }
        let (lo, hi) = match b.support {
            Support::Bounded { lo, hi } => (lo, hi),
            Support::Unbounded => {
                return Err(Error::invalid(
                    "b",
                    "transform tables need a compactly supported irregular part",
                ))
            }
        };
        // Uniform knots cover the support plus margin. Between the support
        // and the origin b vanishes and B is constant, so the origin only
        // needs to be a knot itself.
        let (table_lo, table_hi) = (lo - TABLE_MARGIN, hi + TABLE_MARGIN);
        let start = table_lo.min(0.0);
        let end = table_hi.max(0.0);
        let count = ((table_hi - table_lo) / knot_spacing).ceil().max(1.0) as usize;
        let mut knots: Vec<f64> = (0..=count)
            .map(|i| table_lo + (table_hi - table_lo) * (i as f64 / count as f64))
            .collect();
        // Breakpoints (and 0) become knots, replacing any uniform knot that
        // sits too close to them.
        let min_gap = 1e-3 * knot_spacing;
        let mut pinned: Vec<f64> = b
            .breakpoints
            .iter()
            .copied()
            .filter(|x| x.is_finite() && *x > start && *x < end)
            .chain(std::iter::once(0.0))
            .collect();
        pinned.sort_by(f64::total_cmp);
        pinned.dedup();
        knots.retain(|k| pinned.iter().all(|p| (k - p).abs() >= min_gap) || *k == table_lo || *k == table_hi);
        knots.extend(pinned);
        knots.sort_by(f64::total_cmp);
        knots.dedup();

        let bf = b.function();
        let f = |x: f64| bf(x);
        let mut antiderivative = Vec::with_capacity(knots.len());
        antiderivative.push(0.0);
        let mut acc = 0.0;
        for w in knots.windows(2) {
            let width = w[1] - w[0];
            let tol = 1e-15 + 1e-13 * b.sup_norm * width;
            acc += adaptive_gauss_kronrod(&f, w[0], w[1], tol)?;
            antiderivative.push(acc);
        }
        let zero_index = knots
            .iter()
            .position(|&k| k == 0.0)
            .ok_or_else(|| Error::Numerical("knot table lost the origin".into()))?;
        let offset = antiderivative[zero_index];
        for v in &mut antiderivative {
            *v -= offset;
        }
        antiderivative[zero_index] = 0.0;

        let mut phi_knots = Vec::with_capacity(knots.len());
        phi_knots.push(0.0);
        let mut acc = 0.0;
        for (i, w) in knots.windows(2).enumerate() {
            let d = w[1] - w[0];
            let slope = (antiderivative[i + 1] - antiderivative[i]) / d;
            acc += segment_integral(antiderivative[i], slope, d);
            phi_knots.push(acc);
        }
        let phi_offset = phi_knots[zero_index];
        for v in &mut phi_knots {
            *v -= phi_offset;
        }

        let max_abs_b = antiderivative.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self {
            b: b.clone(),
            knots,
            antiderivative,
            phi_knots,
            l1_bound: b.l1_norm.max(max_abs_b),
            knot_spacing,
        })
    }

    pub fn irregular(&self) -> &IrregularDrift {
        &self.b
    }

    /// Bound on `‖b‖_L1` used for the derivative bounds of `phi`.
    pub fn l1_bound(&self) -> f64 {
        self.l1_bound
    }

    pub fn knot_spacing(&self) -> f64 {
        self.knot_spacing
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `(exp(-2‖b‖_L1), exp(2‖b‖_L1))`, the range of `phi'`.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        ((-2.0 * self.l1_bound).exp(), (2.0 * self.l1_bound).exp())
    }

    /// Interval index `i` with `knots[i] <= x < knots[i + 1]`, or `None`
    /// outside the table.
    #[inline]
    fn locate(&self, x: f64) -> Option<usize> {
        let n = self.knots.len();
        if !(x >= self.knots[0] && x < self.knots[n - 1]) {
            return None;
        }
        Some(self.knots.partition_point(|&k| k <= x) - 1)
    }

    /// `B(x) = ∫_0^x b`, linear between knots and constant outside the table.
    pub fn antiderivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => {
                let (x0, x1) = (self.knots[i], self.knots[i + 1]);
                let (b0, b1) = (self.antiderivative[i], self.antiderivative[i + 1]);
                b0 + (b1 - b0) * ((x - x0) / (x1 - x0))
            }
            None if x < self.knots[0] => self.antiderivative[0],
            None => *self.antiderivative.last().unwrap_or(&0.0),
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        let last = self.knots.len() - 1;
        match self.locate(x) {
            Some(i) => {
                let x0 = self.knots[i];
                let d = self.knots[i + 1] - x0;
                let slope = (self.antiderivative[i + 1] - self.antiderivative[i]) / d;
                self.phi_knots[i] + segment_integral(self.antiderivative[i], slope, x - x0)
            }
            None if x < self.knots[0] => {
                self.phi_knots[0] + (-2.0 * self.antiderivative[0]).exp() * (x - self.knots[0])
            }
            None => {
                self.phi_knots[last]
                    + (-2.0 * self.antiderivative[last]).exp() * (x - self.knots[last])
            }
        }
    }

    #[inline]
    pub fn phi_prime(&self, x: f64) -> f64 {
        (-2.0 * self.antiderivative(x)).exp()
    }

    /// `phi'' = -2 b phi'`.
    #[inline]
    pub fn phi_double_prime(&self, x: f64) -> f64 {
        -2.0 * self.b.eval(x) * self.phi_prime(x)
    }

    /// Inverse of `phi` with `|phi(x) - y| <= 1e-12 (1 + |y|)`. The bracket
    /// comes from the global bounds on `phi'` and `phi(0) = 0`.
    pub fn phi_inv(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        let (lower, upper) = self.derivative_bounds();
        let slack = 1.0 + 1e-12;
        let (lo, hi) = if y > 0.0 {
            (y / upper / slack, y / lower * slack)
        } else {
            (y / lower * slack, y / upper / slack)
        };
        let tol = 1e-12 * (1.0 + y.abs());
        monotone_root(|x| self.phi(x), |x| self.phi_prime(x), y, lo, hi, tol)
    }

    /// Knot table as CSV with header `x,B,phi,phi_prime`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,B,phi,phi_prime")?;
        for ((x, big_b), phi) in self.knots.iter().zip(&self.antiderivative).zip(&self.phi_knots) {
            writeln!(out, "{x},{big_b},{phi},{}", (-2.0 * big_b).exp())?;
        }
        Ok(())
    }
}
