use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("fields live on different radial grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid multiplier: {0}")]
    InvalidSpec(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate iterate: {0}")]
    Degenerate(String),

    #[error("{what} diverged at iteration {iteration}: norm {norm:.3e}")]
    Diverged {
        what: &'static str,
        iteration: usize,
        norm: f64,
    },

    #[error("c = {c} is subcritical: {detail}")]
    Subcritical { c: f64, detail: String },

    #[error("Krylov solve stagnated after {iterations} iterations (relative residual {residual:.3e})")]
    Stagnation { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("wrong ground-state kind: {0}")]
    WrongKind(String),

    #[error("solve failed at c = {c}: {source}")]
    AtSpeed {
        c: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
