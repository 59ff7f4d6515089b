//! Small numerical kernels shared by the other modules: adaptive Simpson and
//! Gauss-Kronrod quadrature, a safeguarded monotone root finder and a
//! deterministic pairwise sum.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[lo, hi]` to absolute tolerance
/// `tol`. Fails when the recursion depth is exhausted on a piece whose local
/// error still exceeds the whole tolerance (a non-integrable singularity); a
/// jump only leaves a tiny piece at full depth and passes.
pub fn adaptive_simpson<F>(f: &F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if lo == hi {
        return Ok(0.0);
    }
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = simpson(lo, hi, flo, fmid, fhi);
    let mut ok = true;
    let value = simpson_step(f, lo, hi, flo, fmid, fhi, whole, tol, tol, MAX_DEPTH, &mut ok);
    if !ok || !value.is_finite() {
        return Err(Error::QuadratureDiverged { lo, hi });
    }
    Ok(value)
}

fn simpson(lo: f64, hi: f64, flo: f64, fmid: f64, fhi: f64) -> f64 {
    (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    root_tol: f64,
    depth: u32,
    ok: &mut bool,
) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let mid = 0.5 * (lo + hi);
    let lmid = 0.5 * (lo + mid);
    let rmid = 0.5 * (mid + hi);
    let (flm, frm) = (f(lmid), f(rmid));
    let left = simpson(lo, mid, flo, flm, fmid);
    let right = simpson(mid, hi, fmid, frm, fhi);
    let delta = left + right - whole;
    // Stop splitting once the interval no longer resolves in floating point.
    if delta.abs() <= 15.0 * tol || mid <= lo || mid >= hi || lmid <= lo || rmid >= hi {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        if delta.abs() > root_tol {
            *ok = false;
        }
        return left + right + delta / 15.0;
    }
    simpson_step(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, root_tol, depth - 1, ok)
        + simpson_step(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, root_tol, depth - 1, ok)
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Weights of the embedded 7-point Gauss rule at the odd Kronrod nodes.
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod estimate and its difference to the 7-point Gauss rule.
fn kronrod15<F>(f: &F, lo: f64, hi: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = half * KRONROD_NODES[i];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive Gauss-Kronrod (7/15) quadrature by recursive bisection. Never
/// samples the interval endpoints, so jumps located exactly at `lo` or `hi`
/// do not pollute the estimate.
pub fn adaptive_gauss_kronrod<F>(f: &F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    fn step<F: Fn(f64) -> f64 + ?Sized>(
        f: &F,
        lo: f64,
        hi: f64,
        tol: f64,
        depth: u32,
    ) -> Option<f64> {
        let (value, err) = kronrod15(f, lo, hi);
        let mid = 0.5 * (lo + hi);
        if err <= tol || mid <= lo || mid >= hi {
            return Some(value);
        }
        if depth == 0 {
            return None;
        }
        Some(step(f, lo, mid, 0.5 * tol, depth - 1)? + step(f, mid, hi, 0.5 * tol, depth - 1)?)
    }
    if lo == hi {
        return Ok(0.0);
    }
    match step(f, lo, hi, tol, MAX_DEPTH) {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(Error::QuadratureDiverged { lo, hi }),
    }
}

/// Finds the root of a strictly increasing `f` inside `[lo, hi]`, where
/// `f(lo) <= target <= f(hi)`. Newton steps use `df`; any step leaving the
/// current bracket is replaced by bisection.
pub fn monotone_root<F, D>(f: F, df: D, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = f(x) - target;
        if r.abs() <= tol {
            return x;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = df(x);
        let newton = x - r / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi <= lo {
            return x;
        }
        x = next;
    }
    x
}

/// Pairwise summation in a fixed tree order. The result depends only on the
/// input order, never on how the caller produced the slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

/// Mean and standard error of the mean, both reduced pairwise.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = pairwise_sum(values) / count;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = pairwise_sum(&squares) / (count - 1.0);
    (mean, (variance / count).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_polynomials_and_exp() {
        let cubic = |x: f64| x * x * x - 2.0 * x + 1.0;
        let v = adaptive_simpson(&cubic, -1.0, 2.0, 1e-12).unwrap();
        assert!((v - 3.75).abs() < 1e-12);

        let e = adaptive_simpson(&|x: f64| (-2.0 * x).exp(), 0.0, 1.0, 1e-13).unwrap();
        assert!((e - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_handles_jump() {
        let step = |x: f64| if x > 0.3 { 1.0 } else { 0.0 };
        let v = adaptive_simpson(&step, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 0.7).abs() < 1e-10);
    }

    #[test]
    fn simpson_reports_divergence() {
        let wild = |x: f64| if x == 0.0 { 0.0 } else { 1.0 / x.abs() };
        assert!(adaptive_simpson(&wild, -1.0, 1.0, 1e-14).is_err());
    }

    #[test]
    fn kronrod_is_exact_for_high_degree_polynomials() {
        let p = |x: f64| x.powi(20);
        let (v, _) = kronrod15(&p, -1.0, 1.0);
        assert!((v - 2.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn kronrod_handles_endpoint_singularities() {
        let f = |x: f64| (1.0 - x).max(0.0).powf(0.75);
        let v = adaptive_gauss_kronrod(&f, 0.0, 1.0, 1e-14).unwrap();
        assert!((v - 1.0 / 1.75).abs() < 1e-12);

        // Value at the jump itself is never sampled.
        let open = |x: f64| if 0.0 < x && x < 1.0 { 1.0 } else { 0.0 };
        assert!((adaptive_gauss_kronrod(&open, 0.0, 1.0, 1e-14).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kronrod_reports_divergence() {
        let wild = |x: f64| 1.0 / x.abs();
        assert!(adaptive_gauss_kronrod(&wild, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn root_of_cubic() {
        let f = |x: f64| x * x * x + x;
        let x = monotone_root(f, |x| 3.0 * x * x + 1.0, 10.0, 0.0, 10.0, 1e-14);
        assert!((f(x) - 10.0).abs() <= 1e-13);
        assert!((x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let values: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&values), 500_500.0);
        let (mean, se) = mean_and_std_error(&[1.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
