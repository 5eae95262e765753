use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schedule evaluated outside its table at t = {t}")]
    OutOfDomain { t: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("closed form is singular at t = {t}")]
    Singularity { t: f64 },

    #[error("accuracy check failed: {0}")]
    Accuracy(String),

    #[error("no classical solution: {0}")]
    NoSolution(String),

    #[error("caustic: fluctuation determinant vanishes at t = {t}")]
    Caustic { t: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
