//! Drift coefficients `mu = a + b`.
//!
//! `a` is a bounded function with two bounded derivatives ([`SmoothDrift`]),
//! `b` is bounded and integrable ([`IrregularDrift`]). The split only matters
//! for the analysis (transform, quadrature functional); the scheme itself
//! only ever evaluates [`DriftSpec::mu`].

mod families;
mod id;
mod seminorm;

use std::fmt;
use std::sync::Arc;

pub use families::{
    indicator, lipschitz_bump, make_holder_bump, make_step_drift, sign_profile, sign_profile_d1,
    sign_profile_d2,
};
pub use id::DriftId;
pub use seminorm::{sobolev_seminorm, BandTreatment, SeminormOptions, SobolevEstimate};

/// Shared real function handle.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Sign with `sign(0) = 0`, unlike [`f64::signum`].
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Regular drift part with its value, two derivatives and their sup bounds.
#[derive(Clone)]
pub struct SmoothDrift {
    eval: RealFn,
    deriv1: RealFn,
    deriv2: RealFn,
    pub sup_norm: f64,
    pub sup_norm_d1: f64,
    pub sup_norm_d2: f64,
}

impl SmoothDrift {
    pub fn new(
        eval: RealFn,
        deriv1: RealFn,
        deriv2: RealFn,
        sup_norm: f64,
        sup_norm_d1: f64,
        sup_norm_d2: f64,
    ) -> Self {
        Self {
            eval,
            deriv1,
            deriv2,
            sup_norm,
            sup_norm_d1,
            sup_norm_d2,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(
            Arc::new(move |_| c),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            c.abs(),
            0.0,
            0.0,
        )
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    #[inline]
    pub fn deriv1(&self, x: f64) -> f64 {
        (self.deriv1)(x)
    }

    #[inline]
    pub fn deriv2(&self, x: f64) -> f64 {
        (self.deriv2)(x)
    }
}

impl fmt::Debug for SmoothDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothDrift")
            .field("sup_norm", &self.sup_norm)
            .field("sup_norm_d1", &self.sup_norm_d1)
            .field("sup_norm_d2", &self.sup_norm_d2)
            .finish_non_exhaustive()
    }
}

/// Where an irregular part can be nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    /// `b = 0` outside the closed interval `[lo, hi]`.
    Bounded { lo: f64, hi: f64 },
    Unbounded,
}

impl Support {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Support::Bounded { lo, hi } => lo <= x && x <= hi,
            Support::Unbounded => true,
        }
    }

    /// Largest `|x|` over the support, `None` when unbounded.
    pub fn radius(&self) -> Option<f64> {
        match *self {
            Support::Bounded { lo, hi } => Some(lo.abs().max(hi.abs())),
            Support::Unbounded => None,
        }
    }
}

/// Bounded, integrable drift part.
#[derive(Clone)]
pub struct IrregularDrift {
    eval: RealFn,
    pub sup_norm: f64,
    pub l1_norm: f64,
    pub support: Support,
    /// Supremum of the Sobolev-Slobodeckij orders `kappa` for which `b` has a
    /// finite seminorm (exclusive), when known.
    pub kappa_nominal: Option<f64>,
    /// Points where `b` may jump or lose smoothness. Quadrature and table
    /// construction split at these.
    pub breakpoints: Vec<f64>,
}

impl IrregularDrift {
    pub fn new(
        eval: RealFn,
        sup_norm: f64,
        l1_norm: f64,
        support: Support,
        kappa_nominal: Option<f64>,
        breakpoints: Vec<f64>,
    ) -> Self {
        Self {
            eval,
            sup_norm,
            l1_norm,
            support,
            kappa_nominal,
            breakpoints,
        }
    }

    pub fn zero() -> Self {
        Self::new(
            Arc::new(|_| 0.0),
            0.0,
            0.0,
            Support::Bounded { lo: 0.0, hi: 0.0 },
            None,
            Vec::new(),
        )
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn function(&self) -> RealFn {
        Arc::clone(&self.eval)
    }

    /// True when `b` is identically zero by construction.
    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }
}

impl fmt::Debug for IrregularDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IrregularDrift")
            .field("sup_norm", &self.sup_norm)
            .field("l1_norm", &self.l1_norm)
            .field("support", &self.support)
            .field("kappa_nominal", &self.kappa_nominal)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

/// Which constructor produced a [`DriftSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum DriftFamily {
    Zero,
    Constant(f64),
    Step { levels: Vec<(f64, f64)>, alpha: f64 },
    Indicator { lo: f64, hi: f64 },
    Holder { gamma: f64, radius: f64 },
    LipschitzBump { radius: f64 },
    Custom,
}

/// A drift coefficient together with its decomposition.
#[derive(Clone)]
pub struct DriftSpec {
    pub smooth: SmoothDrift,
    pub irregular: IrregularDrift,
    pub label: String,
    pub family: DriftFamily,
    total: Option<RealFn>,
}

impl DriftSpec {
    /// Drift given by its decomposition; `mu` is evaluated as `a(x) + b(x)`.
    pub fn new(smooth: SmoothDrift, irregular: IrregularDrift, label: impl Into<String>) -> Self {
        Self {
            smooth,
            irregular,
            label: label.into(),
            family: DriftFamily::Custom,
            total: None,
        }
    }

    pub(crate) fn with_family(mut self, family: DriftFamily) -> Self {
        self.family = family;
        self
    }

    /// Evaluate `mu` by a closed formula instead of `a + b`. Used for step
    /// drifts, where the formula is exact and `a + (mu - a)` may be off by
    /// one rounding.
    pub(crate) fn with_total(mut self, total: RealFn) -> Self {
        self.total = Some(total);
        self
    }

    #[inline]
    pub fn mu(&self, x: f64) -> f64 {
        match &self.total {
            Some(total) => total(x),
            None => self.smooth.eval(x) + self.irregular.eval(x),
        }
    }

    /// `|mu| <= bound()` everywhere.
    pub fn bound(&self) -> f64 {
        self.smooth.sup_norm + self.irregular.sup_norm
    }

    /// The constant value when the drift is constant by construction.
    pub fn constant_value(&self) -> Option<f64> {
        match self.family {
            DriftFamily::Zero => Some(0.0),
            DriftFamily::Constant(c) => Some(c),
            _ => None,
        }
    }

    pub fn zero() -> Self {
        Self::new(SmoothDrift::zero(), IrregularDrift::zero(), "zero").with_family(DriftFamily::Zero)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(
            SmoothDrift::constant(c),
            IrregularDrift::zero(),
            format!("constant:{c}"),
        )
        .with_family(DriftFamily::Constant(c))
    }
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec")
            .field("label", &self.label)
            .field("family", &self.family)
            .field("smooth", &self.smooth)
            .field("irregular", &self.irregular)
            .finish()
    }
}

/// `mu(x) = a(x) + b(x)`.
#[inline]
pub fn eval_mu(spec: &DriftSpec, x: f64) -> f64 {
    spec.mu(x)
}
