use thiserror::Error;

/// Errors raised by the evolution engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("invalid group element: {0}")]
    InvalidElement(String),

    #[error("incompatible elements: {0}")]
    Incompatible(String),

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("contraction bound exceeded: mass {mass:.6e} > {bound:.6e}")]
    ContractionBoundExceeded { mass: f64, bound: f64 },

    #[error("contraction violated: Lipschitz mass {lipschitz:.6e} >= 1")]
    ContractionViolated { lipschitz: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("path too coarse to extract a logarithmic derivative at cell {cell}")]
    PathTooCoarse { cell: usize },

    #[error("invalid extension data: {0}")]
    InvalidExtension(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
