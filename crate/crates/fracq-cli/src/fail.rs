//! Failure classes for the harness, each mapped to a process exit code:
//! 1 for validation, 2 for numerical failures, 3 for exhausted budgets.

use std::fmt;
use std::process::ExitCode;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Debug)]
pub enum CliError {
    /// Malformed configuration, bad inputs, or I/O problems.
    Validation(String),
    /// The computation itself failed: addressing, convergence, degenerate
    /// fit grids.
    Numerical(String),
    /// A resource budget was exceeded.
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Numerical(_) => ExitCode::from(2),
            CliError::Budget(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "{}", msg),
            CliError::Numerical(msg) => write!(f, "{}", msg),
            CliError::Budget(msg) => write!(f, "{}", msg),
        }
    }
}

impl From<fracq::Error> for CliError {
    fn from(e: fracq::Error) -> Self {
        match e {
            fracq::Error::InvalidInput(_) | fracq::Error::Unsupported(_) => {
                CliError::Validation(e.to_string())
            }
            fracq::Error::BudgetExceeded(_) => CliError::Budget(e.to_string()),
            fracq::Error::AddressFailure { .. }
            | fracq::Error::NoConvergence(_)
            | fracq::Error::InvalidScale(_)
            | fracq::Error::InvalidGrid(_) => CliError::Numerical(e.to_string()),
        }
    }
}
