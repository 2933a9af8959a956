use thiserror::Error;

/// Errors raised by the blow-up laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or model parameter lies outside the admissible range.
    #[error("parameter out of range: {0}")]
    ParameterDomain(String),

    /// An argument lies outside the domain of an operation (grid too small,
    /// similarity time too early, exponent interval violated, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The grid does not reach far enough for the requested operation.
    #[error("grid half-width {available} is too small, need at least {required}")]
    GridTooSmall { required: f64, available: f64 },

    /// A numerical procedure did not reach its target accuracy.
    #[error("{what} did not converge: achieved {achieved:e}, wanted {target:e}")]
    Convergence {
        what: String,
        achieved: f64,
        target: f64,
    },

    /// A time step produced non-finite values and could not be recovered.
    #[error("step failure at s = {s}: {reason}")]
    StepFailure { s: f64, reason: String },

    /// The mode ODE left the perturbative box; the last valid state is kept.
    #[error("trajectory left |w| < {bound} at s = {s} (w0 = {w0bar:e}, w2 = {w2bar:e})")]
    BlowAway {
        s: f64,
        w0bar: f64,
        w2bar: f64,
        bound: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error reflects an invalid configuration rather than a
    /// numerical failure.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::ParameterDomain(_) | Error::Domain(_) | Error::GridTooSmall { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
