use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis convention mismatch")]
    ConventionMismatch,
    #[error("vector is not lightlike (residual {0:e})")]
    NotLightlike(f64),
    #[error("vector is not future-pointing")]
    NotFuturePointing,
    #[error("expected a unit vector (norm {0})")]
    NotUnit(f64),
    #[error("expected a positive value for {0}")]
    NonPositive(&'static str),
    #[error("vector not tangent (residual {0:e})")]
    NotTangent(f64),
    #[error("singular matrix: {0}")]
    Singular(&'static str),
    #[error("point outside the chart domain")]
    OutOfDomain,
    #[error("invalid group element: {0}")]
    InvalidGroupElement(String),
    #[error("invalid algebra element (residual {0:e})")]
    InvalidAlgebraElement(f64),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("not proportional to Z (residual {0:e})")]
    NotProportional(f64),
    #[error("connection is not a Cartan connection here (smallest singular value {0:e})")]
    RankFailure(f64),
    #[error("map is not an isometry of the extracted data (residual {0:e})")]
    NotIsometry(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
