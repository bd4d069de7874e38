use thiserror::Error;

/// Errors raised across the crate.
///
/// Most operations validate their preconditions eagerly; numerical
/// "events" that are expected in normal use (a pole hit by a complex
/// evaluation, a Y-bound crossing near a singular time) are reported as
/// values, not through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric range exceeded: {0}")]
    NumericRange(String),

    #[error("vorticity has nonzero mean {mean:e}; Biot-Savart inversion needs a mean-zero field")]
    Gauge { mean: f64 },

    #[error("non-finite value at step {step} (t = {time})")]
    Blowup { step: usize, time: f64 },

    #[error("quadrature did not converge: estimated error {estimate:e} > tolerance {tolerance:e} ({context})")]
    Precision {
        context: String,
        estimate: f64,
        tolerance: f64,
    },

    #[error("evaluation point {re} + {im}i lies on or within {distance:e} of a branch cut")]
    Branch { re: f64, im: f64, distance: f64 },

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("invalid experiment configuration: {0}")]
    Validation(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
