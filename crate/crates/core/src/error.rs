use thiserror::Error;

use crate::sdp::SdpSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid experiment or scenario configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Inputs with mismatched dimensions or outside an operation's domain.
    #[error("usage error: {0}")]
    Usage(String),

    /// The instance carries no information about the parameter (e.g. an
    /// all-zero channel), so variances are unbounded.
    #[error("degenerate instance: {0}")]
    Degenerate(String),

    /// A factorization that should succeed did not.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The interior-point solver hit its iteration cap. The best iterate is
    /// kept so callers can still inspect residuals.
    #[error(
        "SDP solver did not converge after {} iterations (gap {:.3e}, diag residual {:.3e})",
        best.iterations, best.duality_gap, best.diag_residual
    )]
    NotConverged { best: Box<SdpSolution> },
}
