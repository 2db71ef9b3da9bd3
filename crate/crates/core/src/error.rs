use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("site {site} out of range for a system of {n} sites")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("site {0} appears more than once")]
    RepeatedSite(usize),

    #[error("site {0} is not part of the operator support")]
    NotInSupport(usize),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace deviates from one by {0:e}")]
    InvalidTrace(f64),

    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("function is undefined at eigenvalue {0}")]
    Singular(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("unknown Pauli letter '{0}'")]
    UnknownPauli(char),

    #[error("energy shell ({lower}, {upper}] contains no eigenvalue")]
    EmptyShell { lower: f64, upper: f64 },

    #[error("state is not a product state")]
    NotProduct,

    #[error("witness local norm {0} exceeds 1 by more than 10%")]
    WitnessNorm(f64),

    #[error("correlation fit underdetermined: {usable} usable distance bins")]
    FitUnderdetermined { usable: usize, samples: Vec<(f64, f64)> },

    #[error("correlations do not decay with distance (fitted slope {0})")]
    NotDecaying(f64),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("term {index}: {reason}")]
    Term { index: usize, reason: String },

    #[error("input schema: field `{field}`: {reason}")]
    Schema { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
