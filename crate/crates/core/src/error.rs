use thiserror::Error;

/// Errors raised by matrix validation, divergence kernels and model construction.
///
/// Each message starts with the name of the violated invariant so that CLI
/// diagnostics can be matched on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("NotSquare: matrix has {rows} rows but row {row} has {cols} entries")]
    NotSquare { rows: usize, row: usize, cols: usize },

    #[error("EmptyMatrix: matrix has no entries")]
    EmptyMatrix,

    #[error("UnsupportedDimension: dimension {0} is outside 1..={max}", max = crate::linalg::MAX_DIM)]
    UnsupportedDimension(usize),

    #[error("AsymmetryExceedsTolerance: entries ({i},{j}) and ({j},{i}) differ by relative {relative:e}")]
    AsymmetryExceedsTolerance { i: usize, j: usize, relative: f64 },

    #[error("NotPositiveDefinite: pivot {index} is {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("NonFinite: entry ({i},{j}) is {value}")]
    NonFinite { i: usize, j: usize, value: f64 },

    #[error("DimensionMismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("NonPositiveVariance: variance {index} is {value}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("InvalidWeight: mixture weight {0} is outside (0, 1)")]
    InvalidWeight(f64),

    #[error("InvalidSpread: spread {0} must be positive")]
    InvalidSpread(f64),

    #[error("SpreadTooLarge: component scale factor {factor} is not positive (spread {spread})")]
    SpreadTooLarge { spread: f64, factor: f64 },

    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),

    #[error("ParseError: line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("IoError: {0}")]
    Io(String),
}

impl Error {
    /// Name of the violated invariant, e.g. `NotSquare`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::EmptyMatrix => "EmptyMatrix",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::AsymmetryExceedsTolerance { .. } => "AsymmetryExceedsTolerance",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::NonFinite { .. } => "NonFinite",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonPositiveVariance { .. } => "NonPositiveVariance",
            Error::InvalidWeight(_) => "InvalidWeight",
            Error::InvalidSpread(_) => "InvalidSpread",
            Error::SpreadTooLarge { .. } => "SpreadTooLarge",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Parse { .. } => "ParseError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
