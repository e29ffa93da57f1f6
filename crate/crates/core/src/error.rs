use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the numerical routines.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range input.
    Input(String),
    /// A value fell outside the domain of a formula (e.g. points off the hyperboloid).
    NumericDomain(String),
    /// A factorization hit a non-positive pivot; carries the offending value
    /// or the smallest eigenvalue when it was computed.
    Conditioning { smallest_eigenvalue: f64 },
    /// An iteration did not converge; carries the residual history.
    NonConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },
    /// A documented precondition does not hold.
    Precondition(String),
    /// A construction produced an object violating its own invariant.
    Construction(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::NumericDomain(msg.into())
    }
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
    pub fn construction(msg: impl Into<String>) -> Self {
        Error::Construction(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Input(m) => write!(f, "invalid input: {m}"),
            Error::NumericDomain(m) => write!(f, "numeric domain error: {m}"),
            Error::Conditioning {
                smallest_eigenvalue,
            } => {
                write!(f, "matrix not positive definite (smallest eigenvalue/pivot {smallest_eigenvalue:e})")
            }
            Error::NonConvergence {
                iterations,
                residuals,
            } => write!(
                f,
                "no convergence after {iterations} iterations (last residual {:e})",
                residuals.last().copied().unwrap_or(f64::NAN)
            ),
            Error::Precondition(m) => write!(f, "precondition violated: {m}"),
            Error::Construction(m) => write!(f, "construction failed: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
