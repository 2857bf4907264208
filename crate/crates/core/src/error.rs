use thiserror::Error;

/// Errors raised by the library.
///
/// The variants are coarse on purpose: callers (the CLI in particular) map
/// them onto exit codes, so each one corresponds to a distinct failure class.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a formula (x ∉ [0, L], γL/2 ≥ 1, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// The caller combined arguments inconsistently (grid mismatch, ν = 0, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// A configuration value is invalid (CFL violation, bad parameter set).
    #[error("configuration error: {0}")]
    Config(String),
    /// The parameters leave the regime in which the construction is valid.
    #[error("regime violation: {0}")]
    Regime(String),
    /// A mode cannot be reached by the control.
    #[error("mode {mode} is uncontrollable: {detail}")]
    Uncontrollable { mode: i64, detail: String },
    /// A solver did not converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
