use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SepError {
    #[error("invalid environment law: {0}")]
    InvalidLaw(String),
    #[error("invalid torus dimensions: {0}")]
    InvalidDims(String),
    #[error("invalid site {site} for a torus with {size} sites")]
    InvalidSite { site: usize, size: usize },
    #[error("sites {x} and {y} are not nearest neighbours")]
    NotNeighbours { x: usize, y: usize },
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("test function support (radius {radius}) does not fit the rescaled torus (period {period})")]
    SupportOverflow { radius: f64, period: f64 },
    #[error("event times are not strictly increasing at index {0}")]
    NonMonotoneTimes(usize),
    #[error("torus too large for dense output: {size} sites (limit {limit})")]
    TooLarge { size: usize, limit: usize },
    #[error("displacement {displacement} exceeds half the torus side {side}; grow the torus")]
    WrapAmbiguity { displacement: i64, side: usize },
    #[error("covariance matrix is not positive definite")]
    DegenerateSigma,
    #[error("{0}")]
    Unsupported(String),
    #[error("projected event count {projected:.3e} exceeds the configured cap {cap:.3e}")]
    Budget { projected: f64, cap: f64 },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for SepError {
    fn from(e: std::io::Error) -> Self {
        SepError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for SepError {
    fn from(e: serde_json::Error) -> Self {
        SepError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SepError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SepError {
    SepError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
