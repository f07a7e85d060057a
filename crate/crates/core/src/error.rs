//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. The variants are coarse on
//! purpose: the CLI maps them onto a small set of exit codes, and the FFI
//! layer maps them onto C error codes.

use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The kernel was evaluated on its singular set (`u = v`).
    #[error("singular input: {0}")]
    SingularInput(String),
    /// Two objects that must share a grid do not.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch {
        /// Expected length.
        expected: usize,
        /// Supplied length.
        found: usize,
    },
    /// A geometric quantity left its domain of definition.
    #[error("domain error: {0}")]
    Domain(String),
    /// A characteristic cannot reach the requested position.
    #[error("unreachable target: {0}")]
    Unreachable(String),
    /// A backward ray is tangent to the boundary.
    #[error("grazing ray: {0}")]
    Grazing(String),
    /// A velocity was zero where a direction is required.
    #[error("zero velocity")]
    ZeroVelocity,
    /// Adaptive quadrature did not reach its tolerance.
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    /// An iterative method ran out of iterations.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        /// Name of the iteration.
        what: String,
        /// Iterations performed.
        iterations: usize,
        /// Final residual.
        residual: f64,
    },
    /// An operation's input precondition was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A matrix that must be invertible is not.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    /// A decay fit had no usable data.
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
    /// Two independent estimates disagree.
    #[error("inconsistent estimates: {0}")]
    Inconsistent(String),
    /// A solution grew where it must decay.
    #[error("growth error: {0}")]
    Growth(String),
    /// Conservation drift exceeded its threshold.
    #[error("step rejected: {0}")]
    StepRejected(String),
    /// Configuration could not be parsed or validated.
    #[error("configuration error: {0}")]
    Config(String),
    /// I/O failure while writing outputs.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Checks that a slice has the expected length.
pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
