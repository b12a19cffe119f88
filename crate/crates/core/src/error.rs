use thiserror::Error;

/// Failures raised by model construction, simulation and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stability: {0}")]
    Stability(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The realized intensity exceeded the thinning bound at a candidate.
    /// This is a logic error in the majorant and aborts the simulation.
    #[error("majorant violated at t = {time}: intensity {intensity} > bound {bound}")]
    MajorantViolation {
        time: f64,
        intensity: f64,
        bound: f64,
    },

    /// An explicit band field was asked for atoms above its stored height.
    #[error("band field exhausted: need height {needed}, field stores up to {available}")]
    FieldExhausted { needed: f64, available: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {value}")))
    }
}
