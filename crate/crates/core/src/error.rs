use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("index {index} beyond the explicit weight list (length {len})")]
    TruncationRange { index: usize, len: usize },

    #[error("invalid weight sequence: {0}")]
    InvalidWeights(String),

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero {0} is not strictly inside the unit disk")]
    ZeroOutsideDisk(String),

    #[error("repeated zeros {a} and {b}; perturb one of them (e.g. by 1e-6) and retry")]
    RepeatedZeros { a: String, b: String },

    #[error("degree {degree} exceeds the rational reduction cap {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("root finder did not converge: {0}")]
    RootFinder(String),

    #[error("matrix is numerically singular (min singular value {min_singular:e})")]
    Singular { min_singular: f64 },

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("truncation overflow: {0}")]
    TruncationOverflow(String),

    #[error("point {point} lies within {distance:e} of the boundary curve (margin {margin:e})")]
    MarginViolation {
        point: String,
        distance: f64,
        margin: f64,
    },

    #[error("winding number {value} is not within 0.05 of an integer")]
    AmbiguousWinding { value: f64 },

    #[error("argument-principle count {winding} disagrees with root count {roots}")]
    IndexMismatch { winding: i64, roots: usize },

    #[error("fiber over the base point is inconsistent: {0}")]
    InconsistentFiber(String),

    #[error("path tracking failed: {0}")]
    Tracking(String),

    #[error("inner factor rejected: {0}")]
    Inconsistent(String),

    #[error("frame degenerates: {0}")]
    Degenerate(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("region {region} is not index-constant")]
    RegionNotConstant { region: usize },
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn fmt_c(z: num_complex::Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}
