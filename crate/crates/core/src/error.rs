//! Error taxonomy shared across the toolkit.
//!
//! Every fallible public operation returns [`Result`]. The variants map onto
//! the failure classes the callers need to tell apart: bad inputs (`Domain`),
//! boundary singularities (`Singular`), iteration failures (`Convergence`),
//! misuse of stateful drivers (`Sequencing`), degenerate analysis inputs
//! (`Analysis`), impossible intervention requests (`Infeasible`), and
//! configuration / IO problems.

use thiserror::Error;

/// Unified error type for the toolkit.
#[derive(Debug, Error)]
pub enum TrapError {
    /// Input outside the mathematical domain (negative or non-finite state,
    /// invalid parameter value, fraction outside [0, 1]).
    #[error("domain error: {0}")]
    Domain(String),

    /// Operation undefined at a boundary (e.g. Jacobian at k_a = 0 where the
    /// production term's derivative diverges).
    #[error("singularity: {0}")]
    Singular(String),

    /// An iterative method failed to converge within its budget.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A stateful driver was used out of order (e.g. stepping a finished run).
    #[error("sequencing error: {0}")]
    Sequencing(String),

    /// Analysis input is degenerate (empty sample, all-zero incomes, no
    /// attractors, too few distinct values to bin).
    #[error("analysis error: {0}")]
    Analysis(String),

    /// No intervention satisfying the constraints exists.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Configuration file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Underlying IO failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, TrapError>;
