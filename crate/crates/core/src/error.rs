use thiserror::Error;

use crate::sim::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Every hypothesis became infeasible after incorporating a measurement.
    #[error("observation is infeasible under every hypothesis")]
    InfeasibleObservation,

    /// The information state has no finite entry.
    #[error("information state has no finite entry")]
    InfeasibleState,

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("policy `{policy}` emitted non-finite control {u} at t = {t}")]
    PolicyFault { policy: String, t: usize, u: f64 },

    /// The state magnitude left the representable range; carries the
    /// trajectory recorded up to that point.
    #[error("state diverged (|x| > {limit:e}) at t = {t}")]
    Diverged {
        t: usize,
        limit: f64,
        partial: Box<Trajectory>,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {value}")))
    }
}
