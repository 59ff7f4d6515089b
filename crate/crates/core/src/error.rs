use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// The CLI maps [`Error::Config`]-like variants to exit code 2 and
/// numerical failures to exit code 3, see [`Error::is_config_error`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot parse {what} from `{input}`: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    #[error("grids have different horizons ({left} vs {right})")]
    HorizonMismatch { left: f64, right: f64 },

    #[error("grid is not nested in the target grid: time {time} is missing")]
    NotNested { time: f64 },

    #[error("non-finite value {value} at x = {location}")]
    NonFinite { location: f64, value: f64 },

    #[error("non-finite drift value at step {step} (x = {state})")]
    NonFiniteDrift { step: usize, state: f64 },

    #[error("function is not supported inside the truncation box: f({location}) = {value}")]
    SupportNotContained { location: f64, value: f64 },

    #[error("diffusion coefficient not elliptic: sigma({location}) = {value}")]
    NotElliptic { location: f64, value: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}]")]
    QuadratureDiverged { lo: f64, hi: f64 },

    #[error("error at index {index} is not positive: {value}")]
    NonPositiveError { index: usize, value: f64 },

    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(what: &'static str, input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.to_owned(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Parse { .. }
                | Error::HorizonMismatch { .. }
                | Error::NotNested { .. }
                | Error::SupportNotContained { .. }
                | Error::NotElliptic { .. }
                | Error::Io { .. }
                | Error::Format { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
