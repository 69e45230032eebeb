use std::error;
use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared across the library.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Input failed validation: bad probability vector, mismatched
    /// dimensions, malformed words, out-of-range parameters.
    InvalidInput(String),
    /// The input is well formed but the operation does not support it
    /// (missing inverse, non-affine preimage request, r < 1 for the exact
    /// 1-D solver, hypothesis violations).
    Unsupported(String),
    /// A resource budget (enumeration size, sample count, atom count) was
    /// exceeded. Budgets exist so desk-scale runs stay desk-scale.
    BudgetExceeded(String),
    /// The greedy address descent found no branch image containing the
    /// current point, even after snapping.
    AddressFailure { step: usize, reason: String },
    /// An iterative solver failed to reach its residual target.
    NoConvergence(String),
    /// The scale grid is unusable for a box-count fit (for example the
    /// smallest scale is at or below the cloud resolution).
    InvalidScale(String),
    /// The quantizer size grid is unusable for a dimension fit (for
    /// example a grid entry reaches zero quantization error).
    InvalidGrid(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {}", msg),
            Error::Unsupported(msg) => write!(f, "unsupported input: {}", msg),
            Error::BudgetExceeded(msg) => write!(f, "budget exceeded: {}", msg),
            Error::AddressFailure { step, reason } => {
                write!(f, "address failure at step {}: {}", step, reason)
            }
            Error::NoConvergence(msg) => write!(f, "no convergence: {}", msg),
            Error::InvalidScale(msg) => write!(f, "invalid scale grid: {}", msg),
            Error::InvalidGrid(msg) => write!(f, "invalid size grid: {}", msg),
        }
    }
}

impl error::Error for Error {}
