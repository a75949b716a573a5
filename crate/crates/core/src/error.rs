use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is numerically singular (pivot {pivot:.3e} at step {step})")]
    SingularMatrix { step: usize, pivot: f64 },
    #[error("matrix is not positive definite (pivot {pivot:.3e} at step {step})")]
    NotPositiveDefinite { step: usize, pivot: f64 },
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("index ({row}, {col}) out of range for {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("no quadrature rule of degree {0} (maximum is 6)")]
    UnsupportedDegree(usize),
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("slope fit needs at least two positive points, got {0}")]
    DegenerateFit(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
