use std::sync::Arc;

use super::{sign, DriftFamily, DriftSpec, IrregularDrift, SmoothDrift, Support};
use crate::error::{Error, Result};

/// Normalized primitive of `s^2 (1 - s)^2` on `[0, 1]`, i.e. `10u^3 - 15u^4 + 6u^5`.
#[inline]
fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

#[inline]
fn smoothstep_d1(u: f64) -> f64 {
    let w = u * (1.0 - u);
    30.0 * w * w
}

#[inline]
fn smoothstep_d2(u: f64) -> f64 {
    60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
}

/// `max |smoothstep'| = 30/16` at `u = 1/2`.
const SMOOTHSTEP_D1_MAX: f64 = 1.875;
/// `max |smoothstep''| = 10/sqrt(3)` at `u = 1/2 -+ sqrt(3)/6`.
const SMOOTHSTEP_D2_MAX: f64 = 5.773_502_691_896_258;
/// `int_0^alpha (1 - a_alpha(y)) dy = 5 alpha / 16`.
const SIGN_RESIDUAL_L1_PER_SIDE: f64 = 5.0 / 16.0;

/// Smooth profile `a_alpha` of the sign decomposition: `-1` left of `-alpha`,
/// `1` right of `alpha`, and in between the rescaled primitive of the
/// quartic `(2 alpha - y)^2 (y - alpha)^2`.
pub fn sign_profile(x: f64, alpha: f64) -> f64 {
    if x >= alpha {
        1.0
    } else if x <= -alpha {
        -1.0
    } else {
        2.0 * smoothstep((x + alpha) / (2.0 * alpha)) - 1.0
    }
}

pub fn sign_profile_d1(x: f64, alpha: f64) -> f64 {
    if x.abs() >= alpha {
        0.0
    } else {
        smoothstep_d1((x + alpha) / (2.0 * alpha)) / alpha
    }
}

pub fn sign_profile_d2(x: f64, alpha: f64) -> f64 {
    if x.abs() >= alpha {
        0.0
    } else {
        smoothstep_d2((x + alpha) / (2.0 * alpha)) / (2.0 * alpha * alpha)
    }
}

/// Step drift `mu(x) = sum_l gamma_l sign(x - x_l)`, split into a smooth part
/// built from shifted sign profiles and the compactly supported residual
/// `b = mu - a`.
pub fn make_step_drift(levels: &[(f64, f64)], alpha: f64) -> Result<DriftSpec> {
    if levels.is_empty() {
        return Err(Error::invalid("levels", "step drift needs at least one level"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    for (gamma, x) in levels {
        if !gamma.is_finite() || !x.is_finite() {
            return Err(Error::invalid("levels", format!("non-finite level ({gamma}, {x})")));
        }
    }
    for (i, pair) in levels.windows(2).enumerate() {
        let gap = pair[1].1 - pair[0].1;
        if gap <= 0.0 {
            return Err(Error::invalid(
                "levels",
                format!("jump locations must increase strictly (index {})", i + 1),
            ));
        }
        if alpha >= 0.5 * gap {
            return Err(Error::invalid(
                "alpha",
                format!(
                    "smoothing windows overlap: alpha = {alpha} but jumps {} and {} are {gap} apart",
                    pair[0].1, pair[1].1
                ),
            ));
        }
    }

    let levels: Arc<[(f64, f64)]> = levels.into();
    let max_gamma = levels.iter().map(|(g, _)| g.abs()).fold(0.0, f64::max);
    let sum_gamma: f64 = levels.iter().map(|(g, _)| g.abs()).sum();

    let total = {
        let levels = Arc::clone(&levels);
        move |x: f64| -> f64 { levels.iter().map(|&(g, xl)| g * sign(x - xl)).sum() }
    };
    let smooth_eval = {
        let levels = Arc::clone(&levels);
        move |x: f64| -> f64 {
            levels
                .iter()
                .map(|&(g, xl)| g * sign_profile(x - xl, alpha))
                .sum()
        }
    };
    let smooth_d1 = {
        let levels = Arc::clone(&levels);
        move |x: f64| -> f64 {
            levels
                .iter()
                .map(|&(g, xl)| g * sign_profile_d1(x - xl, alpha))
                .sum()
        }
    };
    let smooth_d2 = {
        let levels = Arc::clone(&levels);
        move |x: f64| -> f64 {
            levels
                .iter()
                .map(|&(g, xl)| g * sign_profile_d2(x - xl, alpha))
                .sum()
        }
    };
    // Windows are disjoint, so only the nearest jump contributes to b.
    let residual = {
        let levels = Arc::clone(&levels);
        move |x: f64| -> f64 {
            levels
                .iter()
                .find(|&&(_, xl)| (x - xl).abs() < alpha)
                .map_or(0.0, |&(g, xl)| g * (sign(x - xl) - sign_profile(x - xl, alpha)))
        }
    };

    let smooth = SmoothDrift::new(
        Arc::new(smooth_eval),
        Arc::new(smooth_d1),
        Arc::new(smooth_d2),
        sum_gamma,
        max_gamma * SMOOTHSTEP_D1_MAX / alpha,
        max_gamma * SMOOTHSTEP_D2_MAX / (2.0 * alpha * alpha),
    );
    let first = levels[0].1;
    let last = levels[levels.len() - 1].1;
    let irregular = IrregularDrift::new(
        Arc::new(residual),
        max_gamma,
        sum_gamma * 2.0 * SIGN_RESIDUAL_L1_PER_SIDE * alpha,
        Support::Bounded {
            lo: first - alpha,
            hi: last + alpha,
        },
        Some(0.5),
        levels.iter().map(|&(_, x)| x).collect(),
    );

    let label = if levels.len() == 1 && levels[0] == (1.0, 0.0) {
        format!("sign:{alpha}")
    } else {
        let body: Vec<String> = levels.iter().map(|(g, x)| format!("({g},{x})")).collect();
        format!("step:[{}]:{alpha}", body.join(","))
    };
    let family = DriftFamily::Step {
        levels: levels.to_vec(),
        alpha,
    };
    Ok(DriftSpec::new(smooth, irregular, label)
        .with_family(family)
        .with_total(Arc::new(total)))
}

/// Compactly supported `gamma`-Hölder bump `b(x) = (1 - |x|/radius)_+^gamma`
/// with zero smooth part.
pub fn make_holder_bump(gamma: f64, radius: f64) -> Result<DriftSpec> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("gamma", format!("must lie in (0, 1], got {gamma}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
    }
    let eval = move |x: f64| -> f64 {
        let s = 1.0 - x.abs() / radius;
        if s > 0.0 {
            s.powf(gamma)
        } else {
            0.0
        }
    };
    let irregular = IrregularDrift::new(
        Arc::new(eval),
        1.0,
        2.0 * radius / (gamma + 1.0),
        Support::Bounded {
            lo: -radius,
            hi: radius,
        },
        Some((gamma + 0.5).min(1.0)),
        vec![-radius, 0.0, radius],
    );
    Ok(
        DriftSpec::new(SmoothDrift::zero(), irregular, format!("holder:{gamma}:{radius}"))
            .with_family(DriftFamily::Holder { gamma, radius }),
    )
}

/// Indicator drift `b = 1_(lo, hi)` on the open interval.
pub fn indicator(lo: f64, hi: f64) -> Result<DriftSpec> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(
            "indicator",
            format!("need finite lo < hi, got ({lo}, {hi})"),
        ));
    }
    let eval = move |x: f64| if lo < x && x < hi { 1.0 } else { 0.0 };
    let irregular = IrregularDrift::new(
        Arc::new(eval),
        1.0,
        hi - lo,
        Support::Bounded { lo, hi },
        Some(0.5),
        vec![lo, hi],
    );
    Ok(
        DriftSpec::new(SmoothDrift::zero(), irregular, format!("indicator:{lo}:{hi}"))
            .with_family(DriftFamily::Indicator { lo, hi }),
    )
}

/// `max_s 6 s (1 - s^2)^2 = 6 / sqrt(5) * (4/5)^2`, attained at `s = 1/sqrt(5)`.
const BUMP_D1_MAX: f64 = 1.717_300_206_719_838_6;

/// Compactly supported `C^2` bump `a(x) = (1 - (x/radius)^2)^3` on
/// `|x| < radius`. Lipschitz, bounded, zero irregular part.
pub fn lipschitz_bump(radius: f64) -> Result<DriftSpec> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
    }
    let eval = move |x: f64| {
        let s = x / radius;
        let w = 1.0 - s * s;
        if w > 0.0 {
            w * w * w
        } else {
            0.0
        }
    };
    let d1 = move |x: f64| {
        let s = x / radius;
        let w = 1.0 - s * s;
        if w > 0.0 {
            -6.0 * s * w * w / radius
        } else {
            0.0
        }
    };
    let d2 = move |x: f64| {
        let s = x / radius;
        let w = 1.0 - s * s;
        if w > 0.0 {
            -6.0 * w * (1.0 - 5.0 * s * s) / (radius * radius)
        } else {
            0.0
        }
    };
    let smooth = SmoothDrift::new(
        Arc::new(eval),
        Arc::new(d1),
        Arc::new(d2),
        1.0,
        BUMP_D1_MAX / radius,
        6.0 / (radius * radius),
    );
    Ok(
        DriftSpec::new(smooth, IrregularDrift::zero(), format!("lipschitz_bump:{radius}"))
            .with_family(DriftFamily::LipschitzBump { radius }),
    )
}
