use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index ({i}, {j}) outside the {nx}x{ny} spatial grid")]
    IndexOutOfRange { i: i64, j: i64, nx: usize, ny: usize },

    #[error("pose ({x}, {y}) lies outside the spatial domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("data size mismatch: header declares {expected} bytes, file holds {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("cost value {value} at index {index} is outside (0, 1]")]
    InvalidCost { index: usize, value: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("superbase reduction did not terminate after {0} flips")]
    SellingIterationCap(usize),

    #[error("fixed-point iteration did not converge in {sweeps} sweeps (last change {change:e})")]
    NotConverged { sweeps: usize, change: f64 },

    #[error("distance field is infinite near ({x}, {y}, {theta})")]
    Unreachable { x: f64, y: f64, theta: f64 },

    #[error("backtracking did not reach a seed within {0} steps")]
    TraceNotConverged(usize),

    #[error("sample is empty: {0}")]
    EmptySample(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::MalformedHeader(_) => "malformed_header",
            Error::SizeMismatch { .. } => "size_mismatch",
            Error::InvalidCost { .. } => "invalid_cost",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::SellingIterationCap(_) => "selling_iteration_cap",
            Error::NotConverged { .. } => "not_converged",
            Error::Unreachable { .. } => "unreachable",
            Error::TraceNotConverged(_) => "trace_not_converged",
            Error::EmptySample(_) => "empty_sample",
            Error::Io(_) => "io",
        }
    }
}
