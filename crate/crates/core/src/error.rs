use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("polygon is self-intersecting (segments {0} and {1})")]
    SelfIntersecting(usize, usize),

    #[error("inclusion violates boundary clearance: distance {distance:.3e} m < required {required:.3e} m")]
    Clearance { distance: f64, required: f64 },

    #[error("degenerate cell {cell}: signed area {area:.3e}")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("mesh inversion: cell {cell} would have signed area {area:.3e}")]
    Inversion { cell: usize, area: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("field does not match mesh: {0}")]
    Mismatch(String),

    #[error("singular system: pivot {pivot} has modulus {modulus:.3e} (condition estimate {condition:.3e})")]
    Singular { pivot: usize, modulus: f64, condition: f64 },

    #[error("solve residual too large: {0:.3e}")]
    Residual(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerical pipeline, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::Residual(_)
                | Error::Inversion { .. }
                | Error::DegenerateCell { .. }
                | Error::SelfIntersecting(..)
        )
    }
}
