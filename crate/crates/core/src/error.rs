use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {index} has zero norm and cannot be projected onto the sphere")]
    ZeroRow { index: usize },

    #[error("rows {i} and {j} coincide after projection (colinear inputs, use the stereographic projection)")]
    DuplicateAfterProjection { i: usize, j: usize },

    #[error("{what}: value {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("kernel matrix is singular (smallest eigenvalue {smallest_eigenvalue:e})")]
    SingularKernel { smallest_eigenvalue: f64 },

    #[error("training loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
