use thiserror::Error;

/// Crate-wide error type.
///
/// The variants map onto the CLI exit codes: `InvalidModel` and `Domain`
/// exit 2, `Hypothesis` exits 3, `Numerical` exits 4.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's domain (u ∉ (0,1), x < x_m, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The model violates a Sarmanov constraint; the message names the
    /// violated constraint.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A standing hypothesis of the asymptotic theorem fails; the message
    /// names the failed condition.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// Quadrature non-convergence, rejection-sampler starvation, or an
    /// internal consistency check failure.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
