use thiserror::Error;

/// Errors raised by the model and its numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument or parameter lies outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of subdivisions before reaching the tolerance.
    #[error("quadrature tolerance not reached: estimate {estimate:e}, error {error:e} after {subdivisions} subdivisions")]
    ToleranceNotReached {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    /// Finite-difference step collapsed below floating-point resolution.
    #[error("finite-difference step underflow at gap {gap:e} m")]
    StepUnderflow { gap: f64 },

    /// A bracketing search did not find a sign change.
    #[error("no sign change in [{lo:e}, {hi:e}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// Root refinement failed to converge.
    #[error("root finder did not converge after {iterations} iterations (last bracket [{lo:e}, {hi:e}])")]
    RootNotConverged { lo: f64, hi: f64, iterations: usize },

    /// No stable static equilibrium exists: the mirror has pulled in.
    #[error("pull-in at d = {d:e} m: no stable fixed point (max residual {max_residual:e} N)")]
    PullIn { d: f64, max_residual: f64 },

    /// Calibration input is unusable.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Reading or parsing an input table failed.
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Rejects non-finite or non-positive values with a message naming the quantity.
pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
