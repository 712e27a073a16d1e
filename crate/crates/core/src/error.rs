use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the domain box")]
    Domain { point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("ill-posed: {0}")]
    IllPosed(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("unknown structure id `{0}`")]
    UnknownStructure(String),
    #[error("no grid nodes in annulus of radius {radius}")]
    EmptyAnnulus { radius: f64 },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
