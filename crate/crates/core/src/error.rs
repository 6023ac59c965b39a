use thiserror::Error;

/// Errors raised by the estimation, band and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("process is not stationary: {0}")]
    Stationarity(String),

    #[error("oracle not available: {0}")]
    UnsupportedOracle(String),

    #[error("generation failed (seed {seed}): {message}")]
    Generation { seed: u64, message: String },

    #[error("replication {index} (seed {seed}) failed: {source}")]
    Replication {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical machinery as opposed to bad input or configuration.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::Generation { .. } => true,
            Error::Replication { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
