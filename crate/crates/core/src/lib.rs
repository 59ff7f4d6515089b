//! Strong-convergence laboratory for scalar SDEs with additive noise
//!
//! ```text
//! dX_t = mu(X_t) dt + dW_t,   X_0 = xi,
//! ```
//!
//! where the drift `mu = a + b` splits into a `C_b^2` part `a` and a bounded
//! integrable part `b` that may be discontinuous. The crate provides the
//! Euler-Maruyama scheme on equidistant and quadratic grids, the Zvonkin
//! state-space transform, the weighted Brownian quadrature error functional,
//! a numerical Sobolev-Slobodeckij seminorm, and a reproducible Monte Carlo
//! harness that estimates strong convergence rates.

pub mod cli;
pub mod drift;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod numeric;
pub mod path;
pub mod quadrature;
pub mod scheme;
pub mod transform;

pub use drift::{DriftId, DriftSpec};
pub use error::{Error, Result};
pub use grid::{Grid, GridKind};
pub use path::{BrownianPath, RngStream};
