use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] invreg_core::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dataset has {got} rows; at least {min} are needed")]
    TooFewRows { got: usize, min: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
