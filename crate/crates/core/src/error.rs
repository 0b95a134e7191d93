use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid frequency set: {0}")]
    InvalidFrequencySet(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Hessian of the potential has a negative eigenvalue, so the
    /// parameter is outside the feasible region.
    #[error("indefinite Hessian at x = {point:?} (min eigenvalue {min_eigenvalue:e})")]
    IndefiniteHessian { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("argument outside the domain of {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    #[error("resource cap exceeded: {requested} evaluation points requested, cap is {cap}")]
    ResourceCap { requested: u128, cap: u128 },

    #[error("zero is not strictly feasible: constraint margin {margin:e} at the start point")]
    InfeasibleStart { margin: f64 },

    #[error("line search failed: step shrank below {min_step:e}")]
    LineSearchFailure { min_step: f64 },

    #[error("column {column} is constant")]
    ConstantColumn { column: usize },

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("sample value {value} at row {row}, column {column} lies outside [0, 1]")]
    OutOfUnitCube { row: usize, column: usize, value: f64 },

    #[error("rejection bound violated: density {density:e} exceeds bound {bound:e}")]
    BoundViolation { density: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
