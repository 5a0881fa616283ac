use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid basis specification: {0}")]
    InvalidBasis(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quadrature did not converge after {nodes} nodes (last change {change:.3e})")]
    QuadratureNonConvergence { nodes: usize, change: f64 },

    #[error("singular block encountered at continued-fraction index {index}")]
    SingularBlock { index: usize },

    #[error("asymptotic off-diagonal block J' is singular")]
    SingularOffDiagonal,

    #[error("matrix square root does not exist (defective argument)")]
    DefectiveSquareRoot,

    #[error("continued fraction did not converge up to depth {depth} (relative change {change:.3e})")]
    NonConvergence { depth: usize, change: f64 },

    #[error("short-range potential matrix is degenerate: {0}")]
    DegeneratePotential(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
