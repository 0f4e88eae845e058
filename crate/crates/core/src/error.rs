use thiserror::Error;

/// Errors produced by the library.
///
/// Every operation is a pure function over validated inputs, so errors fall
/// into a small set of categories: parameters outside an operation's
/// mathematical domain, Fock-window truncation that cannot meet the accuracy
/// gates, power series that fail their convergence check, and construction
/// inputs that violate a type invariant.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Parameter outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The truncated Fock window cannot represent the requested quantity to
    /// the target accuracy.
    #[error("truncation error: {0}")]
    Truncation(String),

    /// A power-series evaluation failed its convergence gate.
    #[error("series did not converge: {0}")]
    Series(String),

    /// An expectation value that must be real had too large an imaginary part.
    #[error("expectation not real: |imag| = {imag:.3e} exceeds 1e-10")]
    NotReal { imag: f64 },

    /// A matrix that must be symmetric was not.
    #[error("matrix not symmetric: max asymmetry {0:.3e}")]
    NotSymmetric(f64),

    /// Invalid construction parameters for a state, point, or configuration.
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid { what, why: why.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
