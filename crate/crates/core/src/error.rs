use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frequency {0} outside [0, 1)")]
    TauOutOfRange(f64),

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("nullspace may be empty: {rows} rows >= {cols} columns")]
    NullspaceEmpty { rows: usize, cols: usize },

    #[error("index {index} out of range for ambient dimension {ambient}")]
    IndexOutOfRange { index: usize, ambient: usize },

    #[error("cantor order {0} overflows the index type")]
    CapacityOverflow(u32),

    #[error("recovery hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("eigenvalue iteration failed to converge")]
    EigFailure,

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("no nonnegative grid combination fits the data: residual {residual:.3e} exceeds {tol:.3e}")]
    GridInfeasible { residual: f64, tol: f64 },

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
