use thiserror::Error;

/// Errors reported by the sorting, accumulation, geometry and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The point configuration does not determine the requested quantity.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    /// Not enough correspondences for the requested solver.
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    /// A bearing is (numerically) parallel to the image plane.
    #[error("bearing has near-zero depth component")]
    PointAtInfinity,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateGeometry(msg.into())
    }
}
