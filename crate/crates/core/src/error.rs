use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error("degenerate triangle: apex ({x}, {y}) gives area {area:e}")]
    DegenerateTriangle { x: f64, y: f64, area: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigenvalues not ordered: lambda2 = {lambda2} <= lambda1 = {lambda1}")]
    EigenvalueOrder { lambda1: f64, lambda2: f64 },

    #[error("(m, n) = ({m}, {n}) is not an admissible Lame pair")]
    InadmissiblePair { m: i64, n: i64 },

    #[error("deformation collapses the triangle: k + t*b = {0}")]
    Collapse(f64),

    #[error("mesh has no interior vertices")]
    NoInteriorVertices,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear algebra failure: {0}")]
    Factorization(String),

    #[error("certification failed at cell (j={j}, i={i}) apex ({x}, {y}): {reason}")]
    CertificationFailed { j: usize, i: usize, x: f64, y: f64, reason: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for GapError {
    fn from(e: std::io::Error) -> Self {
        GapError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GapError>;
