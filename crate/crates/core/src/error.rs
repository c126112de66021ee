use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error("quadrature did not converge: estimate {value:e} with error {error_estimate:e} after {subdivisions} subdivisions")]
    Accuracy {
        value: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    /// The linearized model could not be calibrated at the requested radial distance.
    #[error("calibration error: partition sum {q:e} outside (0, {c1:e}) at r0 = {r0:e}")]
    Calibration { q: f64, c1: f64, r0: f64 },

    /// No candidate in the search bracket produced a usable objective.
    #[error("optimization error: {0}")]
    Optimization(String),

    /// Least-squares design matrix is rank deficient.
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be non-negative and finite, got {value}")))
    }
}
