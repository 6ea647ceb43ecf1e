use thiserror::Error;

/// Failure modes shared by every module in the crate.
///
/// Operations never degrade silently: an inadequate basis, an
/// out-of-range parameter or a non-converged iteration is reported
/// through the matching variant instead of through distorted numbers.
#[derive(Debug, Error)]
pub enum Error {
    /// The retained number basis is too small for the requested object.
    #[error("truncated basis too small: {0}")]
    Truncation(String),

    /// Non-finite values or a violated matrix invariant.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A parameter left the window in which results are certified.
    #[error("parameter outside certified range: {0}")]
    Range(String),

    /// Structurally invalid input.
    #[error("invalid input: {0}")]
    Domain(String),

    /// The requested quantity is not identifiable at this configuration.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// An iterative scheme failed to reach its target accuracy.
    #[error("failed to converge: {0}")]
    Convergence(String),

    /// A fringe record is internally inconsistent with the state that
    /// produced it.
    #[error("fringe fit inconsistent: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
