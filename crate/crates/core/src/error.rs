use alloc::string::String;

/// Errors shared by every module of the crate.
///
/// The variants map one-to-one onto the command-line exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("arbitrage detected: {0}")]
    Arbitrage(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Infeasible(_) => 2,
            Error::Arbitrage(_) => 3,
            Error::NonConvergence { .. } => 4,
            Error::Invariant(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Infeasible(_) => "infeasible",
            Error::Arbitrage(_) => "arbitrage",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Invariant(_) => "invariant_violation",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::InvalidInput(alloc::format!($($arg)*)) };
}
macro_rules! invariant {
    ($($arg:tt)*) => { $crate::error::Error::Invariant(alloc::format!($($arg)*)) };
}
pub(crate) use invalid;
pub(crate) use invariant;
