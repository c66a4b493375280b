use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unsupported ambient dimension {0} (supported: 4..=8, or 2..=8 for basis-only use)")]
    UnsupportedDimension(usize),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("operator violates the first Bianchi identity (defect {0:e})")]
    BianchiViolation(f64),

    #[error("k = {k} out of range 1..={dim}")]
    KOutOfRange { k: usize, dim: usize },

    #[error("frame is not orthonormal (defect {0:e})")]
    NonOrthonormalFrame(f64),

    #[error("unsupported cone for this operation: {0}")]
    UnsupportedCone(String),

    #[error("operator is not on the cone boundary (margin {margin:e}, tolerance {tol:e})")]
    NotOnBoundary { margin: f64, tol: f64 },

    #[error("initial state lies outside the cone (margin {0:e})")]
    OutsideCone(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("metric degenerates: smallest eigenvalue {min_eig:e} below {floor:e}")]
    MetricDegeneration { min_eig: f64, floor: f64 },

    #[error("field is not resolved: tail spectral energy fraction {0:e}")]
    Unresolved(f64),

    #[error("fixed-point iteration did not contract at iterate {iteration} (factor {factor})")]
    NonContraction { iteration: usize, factor: f64 },

    #[error("malformed serialized data: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
