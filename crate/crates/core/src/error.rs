use thiserror::Error;

/// Errors produced by mesh ingestion, construction and certification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cell {cell} is degenerate (condition number {condition:.3e})")]
    DegenerateCell { cell: usize, condition: f64 },

    #[error("cells {a} and {b} intersect outside a common subsimplex near {witness:?}")]
    BadIntersection { a: usize, b: usize, witness: [f64; 3] },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point {0:?} lies outside the domain")]
    OutOfDomain([f64; 3]),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("no isotopy found: {0}")]
    NoIsotopyFound(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("certification failed: {0}")]
    Certification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
